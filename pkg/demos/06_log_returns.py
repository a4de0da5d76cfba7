"""
Log returns of price series
===========================

Two synthetic price paths share a slow common factor.  Percent log returns
are decomposed and the coherence at each scale is summarised.
"""
import numpy as np

from mvlsw import build_daubechies_filter, log_return, mra_decompose, windowed_coherence

rng = np.random.default_rng(4)
T = 1025
common = np.cumsum(rng.normal(0, 0.004, T))
prices = 100 * np.exp(np.stack([common + np.cumsum(rng.normal(0, 0.01, T)),
                                common + np.cumsum(rng.normal(0, 0.01, T))]))

R = np.ma.stack([log_return(p, 1) for p in prices])
R = R[:, 1:].filled()                                 # drop the undefined first return
print("returns (%):", np.round(R[:, :5], 3))

J = 4
sub = np.swapaxes(mra_decompose(R, build_daubechies_filter(2), J), 0, 1)
for j in range(1, J + 1):
    surf = windowed_coherence(sub, [(j, 1, j, 2)], window=100, step=50)
    print(f"scale {j} (periods {2 ** j}-{2 ** (j + 1)} days): "
          f"median coherence {np.ma.median(surf.values):.2f}")
