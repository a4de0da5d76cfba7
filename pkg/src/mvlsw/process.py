"""Multivariate locally stationary wavelet processes with cross-scale dependence.

A process is specified by lower-triangular transfer matrices ``V_j(u)`` and
innovation correlations ``Q_{jj'}(u)`` between scales.  Simulation follows::

    X_t = sum_j sum_k V_j(k/T) psi_j[t - k] z_{j,k}

with the shift ``t - k`` taken modulo ``T`` (periodic boundary, as in the
transforms).  Innovations at a fixed ``k`` are jointly Gaussian across scales
and channels with block covariance ``{Q_{jj'}(k/T)}`` and independent across
``k``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterError, SpecificationError
from .surfaces import CrossScaleSpectrum, MultichannelSeries, coherence_from_spectrum, surface_from_tensor
from .wavelets import QuadratureMirrorPair, discrete_wavelets, parse_wavelet, scaling_vector

AR2_BURN_IN = 500
_TOL = 1e-10


def derive_seed(seed, *counters):
    """Counter-based child seed; independent of generation order."""
    ss = np.random.SeedSequence([int(seed) % 2 ** 64, *(int(c) for c in counters)])
    return int(ss.generate_state(1, np.uint64)[0])


class PiecewiseConstant:
    """Piecewise-constant function of rescaled time ``u`` in ``[0, 1)``.

    ``breaks`` are the ascending start points of each piece (the first must be
    0) and ``values[i]`` is the array returned on ``[breaks[i], breaks[i+1])``.
    """

    def __init__(self, breaks, values):
        self.breaks = np.asarray(breaks, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.breaks.ndim != 1 or len(self.breaks) != len(self.values):
            raise SpecificationError("breaks and values must have equal length")
        if len(self.breaks) == 0 or self.breaks[0] != 0.0:
            raise SpecificationError("first break must be 0")
        if np.any(np.diff(self.breaks) <= 0) or self.breaks[-1] >= 1.0:
            raise SpecificationError("breaks must increase strictly within [0, 1)")

    @classmethod
    def constant(cls, value):
        return cls([0.0], [value])

    def __call__(self, u):
        idx = np.searchsorted(self.breaks, np.asarray(u, dtype=float), side="right") - 1
        return self.values[np.clip(idx, 0, len(self.breaks) - 1)]


def _evaluate(fn, u, shape):
    try:
        out = np.asarray(fn(u), dtype=float)
    except (TypeError, ValueError):
        out = None
    if out is not None and out.shape == (len(u),) + shape:
        return out
    # scalar-valued callable; evaluate point by point
    out = np.stack([np.asarray(fn(float(v)), dtype=float) for v in u])
    if out.shape != (len(u),) + shape:
        raise SpecificationError(f"function returned shape {out.shape[1:]}, expected {shape}")
    return out


@dataclass(frozen=True, eq=False)
class MvLswSpec:
    """Specification of a P-channel, J-scale process.

    Parameters
    ----------
    channels, levels : int
    transfer : callable
        ``u -> V`` with ``V[j-1]`` the ``P x P`` lower-triangular matrix
        ``V_j(u)``; may be vectorised (``(n,) -> (n, J, P, P)``) or scalar.
    innovation_corr : callable or None
        ``u -> Q`` of shape ``(J, J, P, P)``; ``None`` means uncorrelated
        scales (``Q_{jj'} = 0`` for ``j != j'``).
    filter : QuadratureMirrorPair
    smooth_transfer : callable or None
        Optional ``u -> P x P`` transfer for a father-wavelet level at scale
        ``J`` with innovations independent of the wavelet levels.
    """

    channels: int
    levels: int
    transfer: Callable
    innovation_corr: Callable | None
    filter: QuadratureMirrorPair
    smooth_transfer: Callable | None = None

    def transfer_at(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        P, J = self.channels, self.levels
        V = _evaluate(self.transfer, u, (J, P, P))
        upper = np.triu(np.ones((P, P), dtype=bool), 1)
        if np.any(np.abs(V[..., upper]) > 0):
            bad = np.nonzero(np.any(np.abs(V[..., upper]) > 0, axis=(1, 2)))[0][0]
            raise SpecificationError(f"V_j(u) not lower-triangular at u={u[bad]:.6g}")
        return V

    def smooth_at(self, u):
        if self.smooth_transfer is None:
            return None
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return _evaluate(self.smooth_transfer, u, (self.channels, self.channels))

    def corr_at(self, u):
        """``Q`` on the grid, shape ``(n, J, J, P, P)``; identity blocks on the diagonal."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        P, J = self.channels, self.levels
        if self.innovation_corr is None:
            Q = np.zeros((len(u), J, J, P, P))
        else:
            Q = _evaluate(self.innovation_corr, u, (J, J, P, P)).copy()
        for j in range(J):
            if not np.allclose(Q[:, j, j], 0.0, atol=_TOL) and not np.allclose(
                Q[:, j, j], np.eye(P), atol=_TOL
            ):
                raise SpecificationError(f"Q_{{{j + 1}{j + 1}}} must be the identity")
            Q[:, j, j] = np.eye(P)
        if np.any(np.abs(Q) > 1 + _TOL):
            raise SpecificationError("innovation correlations must satisfy |Q| <= 1")
        # Q_{j'j} = Q_{jj'}^T; an upper-triangle-only specification is completed
        for j in range(J):
            for jp in range(j + 1, J):
                upper, lower = Q[:, j, jp], np.swapaxes(Q[:, jp, j], -1, -2)
                if np.allclose(lower, 0.0):
                    Q[:, jp, j] = np.swapaxes(upper, -1, -2)
                elif np.allclose(upper, 0.0):
                    Q[:, j, jp] = lower
                elif not np.allclose(upper, lower, atol=_TOL):
                    raise SpecificationError(
                        f"Q_{{{jp + 1}{j + 1}}} must equal the transpose of Q_{{{j + 1}{jp + 1}}}"
                    )
        return Q

    def covariance_at(self, u):
        """Stacked ``(J*P) x (J*P)`` innovation covariance for each ``u``."""
        Q = self.corr_at(u)
        n, J, _, P, _ = Q.shape
        return Q.transpose(0, 1, 3, 2, 4).reshape(n, J * P, J * P)

    def validate(self, u):
        self.transfer_at(u)
        _factorize(self.covariance_at(u), np.atleast_1d(u))


@dataclass(frozen=True, eq=False)
class Realization:
    """One draw of a process.

    ``subprocesses[j-1, p-1, t]`` is ``X_{j,t}^{(p)}``; when the spec carries a
    smooth level it is stored as the last row.  ``innovations[j-1, p-1, k]``.
    """

    series: MultichannelSeries
    subprocesses: np.ndarray
    innovations: np.ndarray
    seed: int


@dataclass(frozen=True)
class Ar2LatentSpec:
    """AR(2) latent with spectral peak at ``frequency`` (cycles per sample)."""

    modulus: float
    frequency: float
    noise_sd: float = 1.0

    def __post_init__(self):
        if not self.modulus > 1:
            raise SpecificationError("modulus must exceed 1 for a causal AR(2)")
        if not 0 < self.frequency < 0.5:
            raise SpecificationError("frequency must lie in (0, 0.5)")
        if self.noise_sd < 0:
            raise SpecificationError("noise_sd must be non-negative")

    @property
    def phi1(self):
        return 2.0 * np.cos(2.0 * np.pi * self.frequency) / self.modulus

    @property
    def phi2(self):
        return -1.0 / self.modulus ** 2


def _factorize(C, u):
    """Per-time square-root factors of PSD matrices (eigendecomposition)."""
    flat = C.reshape(len(C), -1)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    n = C.shape[-1]
    mats = uniq.reshape(-1, n, n)
    w, U = np.linalg.eigh(mats)
    scale = np.maximum(1.0, np.max(np.abs(w), axis=-1))
    bad = np.nonzero(w[:, 0] < -1e-10 * scale)[0]
    if len(bad):
        first = np.nonzero(inverse == bad[0])[0][0]
        raise SpecificationError(
            f"innovation covariance not positive semi-definite at u={u[first]:.6g} "
            f"(min eigenvalue {w[bad[0], 0]:.3g})"
        )
    factors = U * np.sqrt(np.clip(w, 0.0, None))[:, None, :]
    return factors, inverse


def _check_length(spec, T):
    if 2 ** spec.levels > T:
        raise ParameterError(f"T={T} too short for J={spec.levels}")
    support = (2 ** spec.levels - 1) * (spec.filter.length - 1) + 1
    if support > T:
        raise ParameterError(f"wavelet support {support} exceeds T={T}")


class _Simulator:
    """Precomputed pieces shared across replicates of one spec."""

    def __init__(self, spec, T):
        _check_length(spec, T)
        self.spec, self.T = spec, T
        u = np.arange(T) / T
        self.V = spec.transfer_at(u)
        self.V0 = spec.smooth_at(u)
        if spec.innovation_corr is None:
            self.factors = None
        else:
            self.factors, self.which = _factorize(spec.covariance_at(u), u)
        wav = discrete_wavelets(spec.filter, spec.levels)
        bank = [np.fft.rfft(v, T) for v in wav.vectors]
        if self.V0 is not None:
            bank.append(np.fft.rfft(scaling_vector(spec.filter, spec.levels), T))
        self.bank = np.array(bank)

    def draw(self, rng):
        P, J, T = self.spec.channels, self.spec.levels, self.T
        e = rng.standard_normal((T, J * P))
        if self.factors is not None:
            e = np.einsum("kab,kb->ka", self.factors[self.which], e)
        z = e.reshape(T, J, P).transpose(1, 2, 0)
        if self.V0 is not None:
            z = np.concatenate([z, rng.standard_normal((P, T))[None]], axis=0)
        return z

    def assemble(self, z):
        """Subprocesses from innovations ``z`` of shape ``(..., J[+1], P, T)``."""
        J = self.spec.levels
        V = self.V.transpose(1, 0, 2, 3)
        w = np.einsum("jkpq,...jqk->...jpk", V, z[..., :J, :, :])
        if self.V0 is not None:
            w0 = np.einsum("kpq,...qk->...pk", self.V0, z[..., J, :, :])
            w = np.concatenate([w, w0[..., None, :, :]], axis=-3)
        W = np.fft.rfft(w, axis=-1)
        return np.fft.irfft(W * self.bank[:, None, :], self.T, axis=-1)


def simulate_mvlsw(spec, T, seed):
    """Draw one realization; deterministic given ``seed``."""
    sim = _Simulator(spec, int(T))
    z = sim.draw(np.random.default_rng(int(seed)))
    sub = sim.assemble(z)
    series = MultichannelSeries(sub.sum(axis=0))
    return Realization(series, sub, z, int(seed))


def simulate_batch(spec, T, seed, n, subprocesses=False):
    """Replicates ``r = 0..n-1`` drawn with seeds ``derive_seed(seed, r)``.

    Replicate ``r`` equals ``simulate_mvlsw(spec, T, derive_seed(seed, r))``.
    Returns series of shape ``(n, P, T)``, plus the ``(n, J[+1], P, T)``
    subprocesses when requested.
    """
    return simulate_seeds(spec, T, [derive_seed(seed, r) for r in range(n)], subprocesses)


def simulate_seeds(spec, T, seeds, subprocesses=False):
    """Like :func:`simulate_batch` but with explicit per-replicate seeds."""
    sim = _Simulator(spec, int(T))
    z = np.stack([sim.draw(np.random.default_rng(int(s))) for s in seeds])
    sub = sim.assemble(z)
    series = sub.sum(axis=-3)
    return (series, sub) if subprocesses else series


def true_cross_spectrum(spec, u_grid):
    """``S_{jj'}(u) = V_j(u) Q_{jj'}(u) V_{j'}(u)'`` on ``u_grid``."""
    u = np.atleast_1d(np.asarray(u_grid, dtype=float))
    V = spec.transfer_at(u)
    Q = spec.corr_at(u)
    S = np.einsum("najk,nabkl,nbml->abjmn", V, Q, V)
    return CrossScaleSpectrum(S, u)


def true_coherence(spectrum, pairs=None, squared=False):
    """Coherence surface implied by a spectrum; ``squared`` gives ``|rho|^2``."""
    rho, _ = coherence_from_spectrum(spectrum.values)
    if squared:
        rho = rho ** 2
    return surface_from_tensor(rho, spectrum.u_grid, "spectral", pairs)


def simulate_ar2(spec, T, seed, burn_in=AR2_BURN_IN, n=None):
    """AR(2) sample of length ``T`` after discarding ``burn_in`` points.

    With ``n`` given, returns ``(n, T)`` replicates seeded by
    ``derive_seed(seed, r)``.
    """
    if n is None:
        w = np.random.default_rng(int(seed)).standard_normal(T + burn_in)
    else:
        w = np.stack([np.random.default_rng(derive_seed(seed, r)).standard_normal(T + burn_in)
                      for r in range(n)])
    z = lfilter([1.0], [1.0, -spec.phi1, -spec.phi2], spec.noise_sd * w, axis=-1)
    return z[..., burn_in:]


def mixing_weights(schedule, T, n_latents, sampling_rate=1.0):
    """Expand a piecewise schedule into weights of shape ``(P, n_latents, T)``."""
    duration = T / sampling_rate
    t = np.arange(T) / sampling_rate
    W = np.zeros((len(schedule), n_latents, T))
    for p, segments in enumerate(schedule):
        starts = [float(s) for s, _ in segments]
        if not segments or starts[0] > 0:
            raise ParameterError(f"schedule for channel {p + 1} must start at time 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError(f"schedule for channel {p + 1} is not increasing")
        if starts[-1] >= duration:
            raise ParameterError(f"breakpoint {starts[-1]} beyond duration {duration}")
        for i, (start, weights) in enumerate(segments):
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (n_latents,):
                raise ParameterError(
                    f"channel {p + 1}: {len(weights)} weights for {n_latents} latents"
                )
            end = starts[i + 1] if i + 1 < len(starts) else np.inf
            live = (t >= start) & (t < end)
            W[p][:, live] = weights[:, None]
    return W


def mix_timevarying(latents, schedule, sampling_rate=1.0):
    """Channels as piecewise-constant mixtures of latent series.

    ``schedule[p]`` lists ``(start_time, weights)`` segments for channel
    ``p``, with times in the units of ``sampling_rate`` (seconds when it is
    in Hz).  ``latents`` may carry leading batch axes, ``(..., I, T)``.
    """
    Z = np.asarray(latents, dtype=float)
    if Z.ndim < 2:
        raise ParameterError("latents must be a list of series")
    I, T = Z.shape[-2:]
    W = mixing_weights(schedule, T, I, sampling_rate)
    X = np.einsum("pit,...it->...pt", W, Z)
    if X.ndim == 2:
        return MultichannelSeries(X, sampling_rate)
    return X


# Tri-variate AR(2) mixture: latents peaking at 37.5, 19 and 9 Hz at 100 Hz.
DESIGN_LATENTS = (
    Ar2LatentSpec(1.05, 0.375),
    Ar2LatentSpec(1.01, 0.19),
    Ar2LatentSpec(1.05, 0.09),
)
DESIGN_SCHEDULE = (
    [(0.0, (0.5, 0.0, 0.5))],
    [(0.0, (0.9, 0.1, 0.0)), (5.0, (0.1, 0.9, 0.0))],
    [(0.0, (0.1, 0.0, 0.9)), (5.0, (0.9, 0.0, 0.1))],
)
DESIGN_RATE = 100.0
DESIGN_LENGTH = 1000


def simulate_design(seed, n=None, T=DESIGN_LENGTH, sampling_rate=DESIGN_RATE,
                    latents=DESIGN_LATENTS, schedule=DESIGN_SCHEDULE):
    """Mixture-of-AR(2) design: one series, or ``(n, 3, T)`` replicates."""
    reps = 1 if n is None else n
    Z = np.stack([
        np.stack([simulate_ar2(lat, T, derive_seed(seed, r, i)) for i, lat in enumerate(latents)])
        for r in range(reps)
    ])
    X = np.einsum("pit,...it->...pt", mixing_weights(schedule, T, len(latents), sampling_rate), Z)
    if n is None:
        return MultichannelSeries(X[0], sampling_rate)
    return X


# -- JSON ---------------------------------------------------------------

def _piece_json(fn, name):
    if fn is None:
        return None
    if not isinstance(fn, PiecewiseConstant):
        raise SpecificationError(f"{name} must be piecewise constant to serialise")
    return {"breaks": fn.breaks.tolist(), "values": fn.values.tolist()}


def spec_to_dict(spec):
    corr = None
    if spec.innovation_corr is not None:
        if not isinstance(spec.innovation_corr, PiecewiseConstant):
            raise SpecificationError("innovation_corr must be piecewise constant to serialise")
        pieces = []
        for Q in spec.innovation_corr.values:
            entries = []
            for j in range(spec.levels):
                for jp in range(j + 1, spec.levels):
                    if np.any(Q[j, jp] != 0):
                        entries.append({"scales": [j + 1, jp + 1], "matrix": Q[j, jp].tolist()})
            pieces.append(entries)
        corr = {"breaks": spec.innovation_corr.breaks.tolist(), "values": pieces}
    return {
        "model": "mvlsw",
        "channels": spec.channels,
        "levels": spec.levels,
        "wavelet": spec.filter.family_label,
        "transfer": _piece_json(spec.transfer, "transfer"),
        "innovation_corr": corr,
        "smooth_transfer": _piece_json(spec.smooth_transfer, "smooth_transfer"),
    }


def spec_from_dict(doc):
    """Build an :class:`MvLswSpec` from its JSON document (see README)."""
    try:
        P, J = int(doc["channels"]), int(doc["levels"])
        filt = parse_wavelet(doc.get("wavelet", "db2"))
        tr = doc["transfer"]
        transfer = PiecewiseConstant(tr["breaks"], tr["values"])
    except KeyError as exc:
        raise SpecificationError(f"missing field {exc}") from None
    if transfer.values.shape[1:] != (J, P, P):
        raise SpecificationError(
            f"transfer values have shape {transfer.values.shape[1:]}, expected {(J, P, P)}"
        )
    corr = None
    if doc.get("innovation_corr"):
        qc = doc["innovation_corr"]
        pieces = []
        for entries in qc["values"]:
            Q = np.zeros((J, J, P, P))
            for entry in entries:
                j, jp = entry["scales"]
                if not (1 <= j <= J and 1 <= jp <= J) or j == jp:
                    raise SpecificationError(f"bad scale pair {entry['scales']}")
                Q[j - 1, jp - 1] = np.asarray(entry["matrix"], dtype=float)
                Q[jp - 1, j - 1] = Q[j - 1, jp - 1].T
            pieces.append(Q)
        corr = PiecewiseConstant(qc["breaks"], pieces)
    smooth = None
    if doc.get("smooth_transfer"):
        st = doc["smooth_transfer"]
        smooth = PiecewiseConstant(st["breaks"], st["values"])
    spec = MvLswSpec(P, J, transfer, corr, filt, smooth)
    grid = np.unique(np.concatenate([transfer.breaks] + ([corr.breaks] if corr else [])))
    spec.validate(grid)
    return spec


def load_spec(path):
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
