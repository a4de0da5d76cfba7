"""Cross-scale spectral estimation and coherence from data.

The pipeline is::

    d = empirical_coefficients(x, filt, J)       # d_{j,k} with the 1/sqrt(T) factor
    I = raw_cross_periodogram(d, delta)          # T * d_{j,k} d_{j',k-delta}
    I_s = smooth_periodogram(I, M)               # rectangular, circular
    S_hat = bias_correct(I_s)                    # (A^delta)^{-1} correction
    rho = coherence_estimate(S_hat)

Arrays may carry leading batch axes; every operation acts on the trailing
dimensions only.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d

from .errors import ConfigurationError, ParameterError
from .surfaces import (
    CoherenceSurface,
    CrossScaleSpectrum,
    Pair,
    coherence_from_spectrum,
    parse_pairs,
    surface_from_tensor,
)
from .wavelets import QuadratureMirrorPair, inverse_operator, nondecimated_transform

DEFAULT_WINDOW = 50
DEFAULT_STEP = 10


@dataclass(frozen=True, eq=False)
class EmpiricalCoeffs:
    """``values[..., p-1, j-1, k]`` is ``d_{j,k}^{(p)} = T^{-1/2} sum_t X_t psi_j[t-k]``."""

    values: np.ndarray
    levels: int
    length: int
    filter: QuadratureMirrorPair

    @property
    def filter_label(self):
        return self.filter.family_label

    @property
    def unnormalized(self):
        return self.values * np.sqrt(self.length)


@dataclass(frozen=True, eq=False)
class CrossScalePeriodogram:
    """``values[..., j-1, j'-1, p-1, q-1, k]`` at coefficient lag ``delta = k - k'``."""

    values: np.ndarray
    lag: int
    smoothed: bool
    window_halfwidth: int
    filter: QuadratureMirrorPair

    @property
    def levels(self):
        return self.values.shape[-5]

    @property
    def length(self):
        return self.values.shape[-1]


def empirical_coefficients(x, filt, J):
    """Wavelet coefficients of every channel.

    ``x`` may be a :class:`MultichannelSeries` or an array ``(..., P, T)``.
    """
    values = getattr(x, "values", x)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None]
    T = values.shape[-1]
    d = nondecimated_transform(values, filt, J)[..., :J, :] / np.sqrt(T)
    return EmpiricalCoeffs(d, int(J), T, filt)


def raw_cross_periodogram(d, delta=0):
    """``I_{jj',k,k-delta}^{(p,q)} = D_{j,k}^{(p)} D_{j',k-delta}^{(q)}`` (circular).

    ``D = sqrt(T) d`` are the unnormalised coefficients, so that the
    expectation is ``sum A^delta S`` without a ``1/T`` factor.
    """
    delta = int(delta)
    if abs(delta) >= d.length:
        raise ParameterError(f"|delta| must be below T={d.length}")
    D = d.unnormalized
    shifted = np.roll(D, delta, axis=-1)
    values = np.einsum("...ajk,...bmk->...jmabk", D, shifted)
    return CrossScalePeriodogram(values, delta, False, 0, d.filter)


def smooth_periodogram(periodogram, M):
    """Running mean over ``2M + 1`` coefficient times with periodic wrap."""
    M = int(M)
    if M < 0:
        raise ParameterError("M must be non-negative")
    if 2 * M + 1 > periodogram.length:
        raise ParameterError(f"window 2M+1={2 * M + 1} longer than series {periodogram.length}")
    if M == 0:
        values = periodogram.values
    else:
        values = uniform_filter1d(periodogram.values, 2 * M + 1, axis=-1, mode="wrap")
    return replace(periodogram, values=values, smoothed=True,
                   window_halfwidth=periodogram.window_halfwidth + M if periodogram.smoothed else M)


def bias_correct(periodogram, A_inv=None):
    """Correct a smoothed periodogram with the inverse inner-product operator.

    ``S_hat_{jj'} = sum_{ll'} [A^{-1}]_{(l,l'),(j,j')} I_s_{ll'}``.  When
    ``A_inv`` is omitted it is built for the periodogram's filter, levels and
    lag.  At lag 0 the result is symmetrised so that
    ``S_hat_{jj'}^{(p,q)} == S_hat_{j'j}^{(q,p)}`` exactly.
    """
    J = periodogram.levels
    if A_inv is None:
        A_inv = inverse_operator(periodogram.filter, J, periodogram.lag)
    A_inv = np.asarray(A_inv, dtype=float)
    if A_inv.shape != (J * J, J * J):
        raise ConfigurationError(f"operator is {A_inv.shape}, expected {(J * J, J * J)}")
    I = periodogram.values
    flat = I.reshape(I.shape[:-5] + (J * J,) + I.shape[-3:])
    S = np.einsum("ab,...apqk->...bpqk", A_inv, flat).reshape(I.shape)
    if periodogram.lag == 0:
        S = 0.5 * (S + np.swapaxes(np.swapaxes(S, -5, -4), -3, -2))
    T = periodogram.length
    diag = np.stack([S[..., j, j, p, p, :] for j in range(J) for p in range(S.shape[-2])])
    diagnostics = {"negative_diagonal": int(np.count_nonzero(diag < 0))}
    return CrossScaleSpectrum(S, np.arange(T) / T, estimated=True, diagnostics=diagnostics)


def estimate_spectrum(x, filt, J, M, delta=0):
    """Full pipeline from series to bias-corrected spectrum."""
    d = empirical_coefficients(x, filt, J)
    return bias_correct(smooth_periodogram(raw_cross_periodogram(d, delta), M))


def coherence_estimate(spectrum, pairs=None, floor=1e-12):
    """Spectral coherence ``S_{jj'}^{(p,q)} / sqrt(S_{jj}^{(p,p)} S_{j'j'}^{(q,q)})``.

    Points whose diagonal estimate is at or below ``floor`` times the largest
    diagonal value (negative estimates included) are masked, never NaN.
    """
    if spectrum.values.ndim != 5:
        raise ParameterError("coherence_estimate takes a single spectrum, not a batch")
    rho, _ = coherence_from_spectrum(spectrum.values, floor)
    T = spectrum.values.shape[-1]
    times = np.rint(np.asarray(spectrum.u_grid) * T).astype(int)
    return surface_from_tensor(rho, times, "spectral", pairs and parse_pairs(pairs))


# -- windowed coherence on subprocesses -------------------------------------

def _window_starts(T, window, step, lag):
    if window < 2 or step < 1:
        raise ParameterError("window must be >= 2 and step >= 1")
    first = max(0, -lag)
    last = T - max(0, lag) - window
    if last < first:
        raise ParameterError(f"window {window} with lag {lag} does not fit in T={T}")
    return np.arange(first, last + 1, step)


def _segments(a, b, window, step, lag):
    T = a.shape[-1]
    starts = _window_starts(T, window, step, lag)
    first = starts[0]
    n = len(starts)
    sa = sliding_window_view(a[..., first:], window, axis=-1)[..., ::step, :][..., :n, :]
    sb = sliding_window_view(b[..., first + lag:], window, axis=-1)[..., ::step, :][..., :n, :]
    return sa, sb, starts


def _pearson(sa, sb, scale):
    ca = sa - sa.mean(axis=-1, keepdims=True)
    cb = sb - sb.mean(axis=-1, keepdims=True)
    va = np.sum(ca * ca, axis=-1)
    vb = np.sum(cb * cb, axis=-1)
    tiny = 1e-24 * sa.shape[-1] * scale
    bad = (va <= tiny) | (vb <= tiny)
    r = np.sum(ca * cb, axis=-1) / np.sqrt(np.where(bad, 1.0, va * vb))
    return np.ma.array(np.clip(r, -1.0, 1.0), mask=bad)


def _pair_series(subprocesses, pair, lag_member):
    X = subprocesses
    J, P = X.shape[-3], X.shape[-2]
    for j, p in ((pair.j, pair.p), (pair.jp, pair.q)):
        if not (1 <= j <= J and 1 <= p <= P):
            raise ParameterError(f"pair {pair} outside subprocess array with J={J}, P={P}")
    return X[..., pair.j - 1, pair.p - 1, :], X[..., pair.jp - 1, pair.q - 1, :]


def windowed_correlation(subprocesses, pairs, window=DEFAULT_WINDOW, step=DEFAULT_STEP, lag=0):
    """Windowed Pearson correlation, batched.

    Returns the masked array ``(..., len(pairs), n_windows)`` and the window
    start indices.  ``subprocesses`` has shape ``(..., J, P, T)``.
    """
    X = np.asarray(subprocesses, dtype=float)
    pairs = parse_pairs(pairs)
    scale = float(np.max(X ** 2)) if X.size else 1.0
    rows = []
    for pair in pairs:
        a, b = _pair_series(X, pair, None)
        sa, sb, starts = _segments(a, b, int(window), int(step), int(lag))
        rows.append(_pearson(sa, sb, scale))
    return np.ma.stack(rows, axis=-2), starts


def windowed_coherence(subprocesses, pairs, window=DEFAULT_WINDOW, step=DEFAULT_STEP,
                       lag=0, sampling_rate=1.0):
    """Moving-window correlation between ``X_j^{(p)}(t)`` and ``X_{j'}^{(q)}(t + lag)``.

    ``subprocesses`` is ``(J, P, T)`` (e.g. from :func:`mra_decompose` on each
    channel, or a :class:`Realization`).  The surface stores signed values;
    its ``squared`` property gives ``|rho|^2``.  Window centres are reported
    as (possibly fractional) sample indices.
    """
    X = getattr(subprocesses, "subprocesses", subprocesses)
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise ParameterError("expected subprocesses of shape (J, P, T)")
    pairs = parse_pairs(pairs)
    values, starts = windowed_correlation(X, pairs, window, step, lag)
    centres = starts + (window - 1) / 2.0
    return CoherenceSurface(tuple(pairs), values, centres, "windowed", int(lag),
                            int(window), int(step), sampling_rate)


def _check_controls(pairs, controls, lag):
    for pair in pairs:
        for c in controls:
            if c == (pair.j, pair.p) or (lag == 0 and c == (pair.jp, pair.q)):
                raise ParameterError(f"control {c} overlaps pair {pair}")


def partial_windowed_coherence(subprocesses, pairs, controls, window=DEFAULT_WINDOW,
                               step=DEFAULT_STEP, lag=0, sampling_rate=1.0,
                               max_condition=1e10):
    """Windowed partial correlation of each pair given control subprocesses.

    Controls are ``(j, p)`` subprocesses taken at the same times as the first
    pair member.  Within each window the partial correlation is
    ``-R^{-1}_{01} / sqrt(R^{-1}_{00} R^{-1}_{11})`` for the correlation
    matrix ``R`` of ``[X_j^{(p)}(t), X_{j'}^{(q)}(t + lag), controls]``;
    windows where ``R`` is singular are masked.
    """
    X = np.asarray(getattr(subprocesses, "subprocesses", subprocesses), dtype=float)
    pairs = parse_pairs(pairs)
    controls = [tuple(int(v) for v in c) for c in controls]
    _check_controls(pairs, controls, int(lag))
    if not controls:
        surface = windowed_coherence(X, pairs, window, step, lag, sampling_rate)
        return replace(surface, kind="partial")
    J, P, T = X.shape
    for j, p in controls:
        if not (1 <= j <= J and 1 <= p <= P):
            raise ParameterError(f"control {(j, p)} outside J={J}, P={P}")
    rows = []
    for pair in pairs:
        a, b = _pair_series(X, pair, None)
        sa, sb, starts = _segments(a, b, int(window), int(step), int(lag))
        segs = [sa, sb]
        for j, p in controls:
            sc, _, _ = _segments(X[j - 1, p - 1], b, int(window), int(step), int(lag))
            segs.append(sc)
        Z = np.stack(segs, axis=-2)                      # (n_win, m+2, window)
        Z = Z - Z.mean(axis=-1, keepdims=True)
        C = Z @ np.swapaxes(Z, -1, -2)
        sd = np.sqrt(np.diagonal(C, axis1=-2, axis2=-1))
        degenerate = np.any(sd <= 1e-12 * max(float(sd.max()), 1e-300), axis=-1)
        sd = np.where(sd > 0, sd, 1.0)
        R = C / (sd[..., :, None] * sd[..., None, :])
        cond = np.linalg.cond(R)
        bad = degenerate | ~np.isfinite(cond) | (cond > max_condition)
        R[bad] = np.eye(R.shape[-1])
        Pm = np.linalg.inv(R)
        r = -Pm[..., 0, 1] / np.sqrt(Pm[..., 0, 0] * Pm[..., 1, 1])
        rows.append(np.ma.array(np.clip(r, -1.0, 1.0), mask=bad))
    centres = starts + (window - 1) / 2.0
    return CoherenceSurface(tuple(pairs), np.ma.stack(rows), centres, "partial", int(lag),
                            int(window), int(step), sampling_rate)


def covariance_from_spectrum(spectrum, table, u, tau):
    """Local covariances ``c_{jj'}^{(p,q)}(u, tau) = S_{jj'}^{(p,q)}(u) Psi_{jj'}(tau)``.

    ``u`` is matched to the nearest point of ``spectrum.u_grid``.  Returns an
    array ``(J, J, P, P)`` (with a trailing lag axis when ``tau`` is an
    array); the ``j == j'`` entries are the single-scale covariances.
    """
    J = spectrum.levels
    if table.levels < J:
        raise ParameterError(f"autocorrelation table has {table.levels} levels, need {J}")
    n = int(np.argmin(np.abs(np.asarray(spectrum.u_grid) - u)))
    S = spectrum.values[..., n]
    taus = np.atleast_1d(np.asarray(tau, dtype=int))
    psi = np.stack([[table(j + 1, jp + 1, taus) for jp in range(J)] for j in range(J)])
    out = S[..., None] * psi[:, :, None, None, :]
    return out if np.ndim(tau) else out[..., 0]
