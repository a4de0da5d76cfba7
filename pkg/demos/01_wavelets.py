"""
Discrete wavelets and the inner-product operator
================================================

Builds Daubechies filters, the non-decimated wavelets they generate, and the
matrix that links the expected wavelet periodogram to the spectrum.
"""
import numpy as np

from mvlsw import (
    autocorrelation_wavelets,
    build_daubechies_filter,
    discrete_wavelets,
    inner_product_operator,
    invert_inner_product,
    mra_decompose,
)

np.set_printoptions(precision=5, suppress=True)

# Haar: every quantity can be checked by hand
haar = build_daubechies_filter(1)
psi = discrete_wavelets(haar, 2)
print("psi_1 =", psi[1])
print("psi_2 =", psi[2])

table = autocorrelation_wavelets(discrete_wavelets(haar, 1))
print("Psi_11(-1, 0, 1) =", table(1, 1, np.array([-1, 0, 1])))

A = inner_product_operator(table)
print("A_11;11 =", A.entry(1, 1, 1, 1), " inverse =", invert_inner_product(A)[0, 0])

# D4 with three scales: a 9 x 9 operator over scale pairs
db2 = build_daubechies_filter(2)
print("\ndb2 low-pass:", db2.low_pass)
table = autocorrelation_wavelets(discrete_wavelets(db2, 3))
A = inner_product_operator(table)
print("support lengths:", discrete_wavelets(db2, 3).support_lengths)
print(f"A is {A.matrix.shape}, condition number {A.condition_number:.1f}")
print("A_12;12 =", round(A.entry(1, 2, 1, 2), 5), " A_11;22 =", round(A.entry(1, 1, 2, 2), 5))

# the multiresolution components add back to the signal
x = np.random.default_rng(0).standard_normal(512)
parts = mra_decompose(x, db2, 4)
print("\nvariance by component:", parts.var(axis=1))
print("max |x - sum of components| =", np.abs(x - parts.sum(axis=0)).max())
