"""Daubechies filters, non-decimated wavelets and their inner-product operators.

Conventions
-----------
The scale-``j`` discrete wavelet ``psi_j`` is a finite vector indexed from 0 and
shifted by unit steps, ``psi_{j,k}(t) = psi_j[t - k]``.  Coefficients are
unit-norm correlations, ``d_{j,k} = sum_t x_t psi_j[t - k]``, with periodic
boundary handling.  No ``1/sqrt(T)`` factor is applied here.

With these vectors the reconstruction weights are ``2**-j``::

    x = sum_j 2**-j (psi_j * d_j) + 2**-J (phi_J * s_J)

and the energy identity reads
``||x||^2 = sum_j 2**-j ||d_j||^2 + 2**-J ||s_J||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import ParameterError, SingularOperatorError

MAX_VANISHING_MOMENTS = 10
DEFAULT_MAX_CONDITION = 1e8


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuadratureMirrorPair:
    low_pass: np.ndarray
    high_pass: np.ndarray
    vanishing_moments: int
    family_label: str

    @property
    def length(self):
        return len(self.low_pass)


@dataclass(frozen=True, eq=False)
class DiscreteWaveletSet:
    levels: int
    vectors: tuple
    support_lengths: tuple
    family_label: str = ""

    def __getitem__(self, j):
        """Wavelet vector at scale ``j`` (1-based)."""
        return self.vectors[j - 1]


@dataclass(frozen=True, eq=False)
class AutocorrTable:
    """Cross-scale autocorrelation wavelets ``Psi_{jj'}(tau)``.

    ``values[j-1, j'-1, tau + max_lag]`` holds ``sum_m psi_j[m] psi_j'[m + tau]``.
    """

    levels: int
    values: np.ndarray
    max_lag: int
    family_label: str = ""

    def __call__(self, j, jp, tau):
        tau = np.asarray(tau)
        out = np.zeros(tau.shape)
        inside = np.abs(tau) <= self.max_lag
        out[inside] = self.values[j - 1, jp - 1, tau[inside] + self.max_lag]
        return out if out.ndim else float(out)

    @property
    def lags(self):
        return np.arange(-self.max_lag, self.max_lag + 1)


@dataclass(frozen=True, eq=False)
class InnerProductOperator:
    """``A^delta`` as a ``J^2 x J^2`` matrix.

    Row ``(j, j')`` and column ``(l, l')`` map to ``(j-1)*J + (j'-1)`` and
    ``(l-1)*J + (l'-1)``.
    """

    levels: int
    lag: int
    matrix: np.ndarray
    condition_number: float
    family_label: str = ""

    def entry(self, j, jp, l, lp):
        J = self.levels
        return self.matrix[pair_index(j, jp, J), pair_index(l, lp, J)]


def pair_index(j, jp, J):
    """Flat index of the scale pair ``(j, j')`` (both 1-based)."""
    return (j - 1) * J + (jp - 1)


@lru_cache(maxsize=None)
def _daubechies_low_pass(N):
    # Spectral factorization of the half-band polynomial, keeping the roots
    # inside the unit circle (extremal phase).
    if N == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    poly_y = [comb(N - 1 + k, k) for k in range(N)]
    y_roots = np.roots(poly_y[::-1])
    poly = np.array([1.0 + 0j])
    for _ in range(N):
        poly = np.convolve(poly, [1.0, 1.0])
    for y in y_roots:
        z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        poly = np.convolve(poly, [1.0, -z[np.argmin(np.abs(z))]])
    h = np.real(poly)
    return h * np.sqrt(2.0) / h.sum()


def build_daubechies_filter(vanishing_moments):
    """Extremal-phase Daubechies filter pair with the given vanishing moments.

    Coefficients come from spectral factorization of the Daubechies half-band
    polynomial; one vanishing moment gives the Haar pair.  The high-pass filter
    is ``g_k = (-1)**k h_{L-1-k}``.
    """
    if isinstance(vanishing_moments, bool) or not isinstance(
        vanishing_moments, (int, np.integer)
    ):
        raise ParameterError("vanishing_moments must be an integer")
    if not 1 <= vanishing_moments <= MAX_VANISHING_MOMENTS:
        raise ParameterError(
            f"vanishing_moments must be in 1..{MAX_VANISHING_MOMENTS}, "
            f"got {vanishing_moments}"
        )
    h = _daubechies_low_pass(int(vanishing_moments))
    L = len(h)
    g = np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])
    return QuadratureMirrorPair(
        _frozen(h), _frozen(g), int(vanishing_moments), f"db{vanishing_moments}"
    )


def parse_wavelet(name):
    """Filter pair from a label such as ``"db2"``, ``"haar"`` or ``2``."""
    if isinstance(name, QuadratureMirrorPair):
        return name
    if isinstance(name, (int, np.integer)):
        return build_daubechies_filter(int(name))
    label = str(name).strip().lower()
    if label == "haar":
        return build_daubechies_filter(1)
    for prefix in ("daubechies", "db"):
        if label.startswith(prefix):
            label = label[len(prefix):].strip("-_ ")
            break
    try:
        order = int(label)
    except ValueError:
        raise ParameterError(f"unknown wavelet {name!r}") from None
    return build_daubechies_filter(order)


def _upsample2(v):
    out = np.zeros(2 * len(v) - 1)
    out[::2] = v
    return out


def _cascade(first, h, J):
    vectors = [np.asarray(first, dtype=float)]
    for _ in range(1, J):
        vectors.append(np.convolve(h, _upsample2(vectors[-1])))
    return vectors


def _check_levels(J):
    if isinstance(J, bool) or not isinstance(J, (int, np.integer)) or J < 1:
        raise ParameterError(f"number of levels must be a positive integer, got {J!r}")


def discrete_wavelets(filt, J):
    """Discrete non-decimated wavelets ``psi_1 .. psi_J``.

    ``psi_1`` is the high-pass filter and ``psi_{j+1} = h * (psi_j upsampled
    by 2)``, so ``len(psi_j) = (2**j - 1)(L - 1) + 1``.
    """
    _check_levels(J)
    vectors = [v / np.linalg.norm(v) for v in _cascade(filt.high_pass, filt.low_pass, J)]
    vectors = tuple(_frozen(v) for v in vectors)
    return DiscreteWaveletSet(
        int(J), vectors, tuple(len(v) for v in vectors), filt.family_label
    )


def scaling_vector(filt, J):
    """Discrete father wavelet ``phi_J`` matching :func:`discrete_wavelets`."""
    _check_levels(J)
    return _frozen(_cascade(filt.low_pass, filt.low_pass, J)[-1])


def _validate_length(T, filt, J):
    _check_levels(J)
    if 2 ** J > T:
        raise ParameterError(f"J={J} too large for T={T} (need 2**J <= T)")
    support = (2 ** J - 1) * (filt.length - 1) + 1
    if support > T:
        raise ParameterError(
            f"scale-{J} wavelet support {support} exceeds series length {T}"
        )


def _periodized_fft(v, T):
    return np.fft.rfft(np.asarray(v, dtype=float), T)


@lru_cache(maxsize=64)
def _filter_bank_fft(vm, J, T):
    filt = build_daubechies_filter(vm)
    wav = discrete_wavelets(filt, J)
    bank = [_periodized_fft(v, T) for v in wav.vectors]
    bank.append(_periodized_fft(scaling_vector(filt, J), T))
    bank = np.array(bank)
    bank.setflags(write=False)
    return bank


def _bank(filt, J, T):
    if filt.family_label == f"db{filt.vanishing_moments}":
        return _filter_bank_fft(filt.vanishing_moments, J, T)
    wav = discrete_wavelets(filt, J)
    bank = [_periodized_fft(v, T) for v in wav.vectors]
    bank.append(_periodized_fft(scaling_vector(filt, J), T))
    return np.array(bank)


def nondecimated_transform(x, filt, J):
    """Periodic non-decimated transform.

    Parameters
    ----------
    x : array_like, shape (..., T)
        Series; leading axes are treated as a batch.
    filt : QuadratureMirrorPair
    J : int

    Returns
    -------
    ndarray, shape (..., J + 1, T)
        Rows ``0..J-1`` are ``d_{j,k} = sum_t x_t psi_j[t-k]``; row ``J``
        holds the smooth coefficients against ``phi_J``.
    """
    x = np.asarray(x, dtype=float)
    T = x.shape[-1]
    _validate_length(T, filt, J)
    bank = _bank(filt, J, T)
    X = np.fft.rfft(x, axis=-1)[..., None, :]
    return np.fft.irfft(X * np.conj(bank), T, axis=-1)


def mra_decompose(x, filt, J):
    """Additive multiresolution decomposition ``x = D_1 + ... + D_J + S_J``.

    Returns an array of shape ``(..., J + 1, T)`` whose last row is the
    smooth ``S_J``.
    """
    x = np.asarray(x, dtype=float)
    T = x.shape[-1]
    _validate_length(T, filt, J)
    bank = _bank(filt, J, T)
    weights = 2.0 ** -np.concatenate([np.arange(1, J + 1), [J]])
    X = np.fft.rfft(x, axis=-1)[..., None, :]
    gain = (np.abs(bank) ** 2) * weights[:, None]
    return np.fft.irfft(X * gain, T, axis=-1)


def coefficient_energy(coeffs):
    """Energy of ``nondecimated_transform`` output; equals ``||x||^2``."""
    coeffs = np.asarray(coeffs)
    J = coeffs.shape[-2] - 1
    weights = 2.0 ** -np.concatenate([np.arange(1, J + 1), [J]])
    return np.sum(weights * np.sum(coeffs ** 2, axis=-1), axis=-1)


def autocorrelation_wavelets(wavelets):
    """Exact table of ``Psi_{jj'}(tau) = sum_m psi_j[m] psi_j'[m + tau]``."""
    J = wavelets.levels
    Lmax = max(wavelets.support_lengths)
    max_lag = Lmax - 1
    values = np.zeros((J, J, 2 * max_lag + 1))
    for a, u in enumerate(wavelets.vectors):
        for b, v in enumerate(wavelets.vectors):
            # np.correlate(v, u, "full")[i] pairs u[m] with v[m + i - (len(u)-1)]
            c = np.correlate(v, u, "full")
            lo = max_lag - (len(u) - 1)
            values[a, b, lo:lo + len(c)] = c
    values.setflags(write=False)
    return AutocorrTable(J, values, max_lag, wavelets.family_label)


def inner_product_operator(table, delta=0):
    """``A^delta_{jj';ll'} = sum_tau Psi_{jj'}(tau) Psi_{ll'}(tau + delta)``."""
    delta = int(delta)
    J = table.levels
    F = table.values.reshape(J * J, -1)
    n = F.shape[1]
    p = abs(delta)
    shifted = np.pad(F, ((0, 0), (p, p)))[:, p + delta:p + delta + n]
    A = F @ shifted.T
    if delta == 0:
        A = 0.5 * (A + A.T)
    A.setflags(write=False)
    s = np.linalg.svd(A, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    return InnerProductOperator(J, delta, A, cond, table.family_label)


def invert_inner_product(op, max_condition=DEFAULT_MAX_CONDITION):
    """Inverse of ``A^delta`` via SVD; raises when ill-conditioned."""
    A = np.asarray(op.matrix if isinstance(op, InnerProductOperator) else op, dtype=float)
    U, s, Vt = np.linalg.svd(A)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularOperatorError(cond, max_condition)
    inv = (Vt.T / s) @ U.T
    inv.setflags(write=False)
    return inv


_INVERSE_CACHE = {}


def inverse_operator(filt, J, delta=0):
    """Cached ``(A^delta)^{-1}`` for a filter pair and number of levels."""
    key = (filt.family_label, tuple(filt.low_pass), J, int(delta))
    if key not in _INVERSE_CACHE:
        table = autocorrelation_wavelets(discrete_wavelets(filt, J))
        _INVERSE_CACHE[key] = invert_inner_product(inner_product_operator(table, delta))
    return _INVERSE_CACHE[key]
