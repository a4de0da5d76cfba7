"""Monte-Carlo null thresholds and permutation tests for coherence curves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError
from .estimation import DEFAULT_STEP, DEFAULT_WINDOW, windowed_correlation
from .process import MvLswSpec, PiecewiseConstant, derive_seed, simulate_batch, simulate_seeds
from .surfaces import Pair, parse_pairs
from .wavelets import mra_decompose, parse_wavelet

DEFAULT_LEVELS = (0.95, 0.99, 0.999)
MEASURES = ("squared", "signed")


@dataclass(frozen=True, eq=False)
class NullDistribution:
    """Pooled null draws of ``|rho|`` with quantile lookup.

    ``samples`` are sorted absolute coherences.  Quantiles use the inverse
    empirical CDF, so squared thresholds are exactly the squares of the
    absolute thresholds.
    """

    samples: np.ndarray
    meta: dict
    levels: tuple = DEFAULT_LEVELS

    def quantile(self, level, measure="squared"):
        if measure not in MEASURES:
            raise ParameterError(f"measure must be one of {MEASURES}")
        if not 0 < level < 1:
            raise ParameterError("level must lie in (0, 1)")
        q = float(np.quantile(self.samples, level, method="inverted_cdf"))
        return q * q if measure == "squared" else q

    @property
    def quantiles(self):
        return {lv: self.quantile(lv) for lv in self.levels}

    def to_dict(self, include_samples=False):
        doc = {
            "meta": {k: (str(v) if isinstance(v, Pair) else v) for k, v in self.meta.items()},
            "quantiles": [
                {"level": lv, "squared": self.quantile(lv, "squared"),
                 "abs": self.quantile(lv, "signed")}
                for lv in self.levels
            ],
            "n_samples": int(len(self.samples)),
        }
        if include_samples:
            doc["samples"] = self.samples.tolist()
        return doc


@dataclass(frozen=True, eq=False)
class PermutationResult:
    t_observed: float
    t_permuted: np.ndarray
    p_value: float
    n_perm: int
    seed: int
    diagnostics: dict = field(default_factory=dict)


def _all_cross_scale_pairs(J, P):
    return [Pair(j, p, jp, q) for j in range(1, J + 1) for jp in range(j + 1, J + 1)
            for p in range(1, P + 1) for q in range(1, P + 1)]


def null_subprocesses(spec, T, seed, n, J=None):
    """Simulate ``n`` replicates of ``spec`` and decompose each channel.

    Returns ``(n, J + 1, P, T)`` subprocess arrays (last scale row is the smooth).
    """
    J = spec.levels if J is None else J
    series = simulate_batch(spec, T, seed, n)
    return np.swapaxes(mra_decompose(series, spec.filter, J), -3, -2)


def null_distribution(J, T, P, window=DEFAULT_WINDOW, step=DEFAULT_STEP, n_sim=2000,
                      seed=0, filter="db2", pairs=None, lag=0, transfer=None,
                      levels=DEFAULT_LEVELS, chunk=100):
    """Empirical null of windowed coherence under cross-scale independence.

    Each replicate is a ``P``-channel process with ``J`` scales, identity
    innovation covariance and no cross-scale correlation; ``transfer`` gives
    the per-scale ``(J, P, P)`` matrices (identity by default).  Each channel
    is decomposed with the same filter and ``J``, windowed coherence is
    computed for ``pairs`` (default: every cross-scale pair), and absolute
    values are pooled over windows, pairs and replicates.
    """
    if n_sim < 100:
        raise ParameterError("n_sim must be at least 100")
    filt = parse_wavelet(filter)
    if transfer is None:
        transfer = np.stack([np.eye(P)] * J)
    transfer = np.asarray(transfer, dtype=float)
    if transfer.shape != (J, P, P):
        raise ParameterError(f"transfer must have shape {(J, P, P)}")
    spec = MvLswSpec(P, J, PiecewiseConstant.constant(transfer), None, filt)
    pairs = _all_cross_scale_pairs(J, P) if pairs is None else parse_pairs(pairs)
    if not pairs:
        raise ParameterError("no pairs to evaluate")
    pooled = []
    for start in range(0, n_sim, chunk):
        n = min(chunk, n_sim - start)
        # replicate r of the whole run uses derive_seed(seed, r) regardless of chunking
        series = simulate_seeds(spec, T, [derive_seed(seed, start + i) for i in range(n)])
        sub = np.swapaxes(mra_decompose(series, filt, J), -3, -2)
        vals, _ = windowed_correlation(sub, pairs, window, step, lag)
        pooled.append(np.abs(vals.compressed()))
    samples = np.sort(np.concatenate(pooled))
    samples.setflags(write=False)
    meta = {"J": J, "T": T, "P": P, "window": int(window), "step": int(step), "lag": int(lag),
            "n_sim": int(n_sim), "seed": int(seed), "filter": filt.family_label,
            "pairs": [str(p) for p in pairs]}
    return NullDistribution(samples, meta, tuple(levels))


def _check_meta(surface, meta):
    for key in ("window", "step", "lag"):
        have = getattr(surface, key)
        if key in meta and have is not None and int(meta[key]) != int(have):
            raise ConfigurationError(
                f"surface {key}={have} does not match null distribution {key}={meta[key]}"
            )
    if surface.window is None:
        raise ConfigurationError("null thresholds apply to windowed coherence only")


def significance_mask(surface, dist, level=0.99, measure="squared"):
    """Boolean ``(n_pairs, n_times)`` array: coherence beyond the null threshold.

    Undefined points are never significant.
    """
    _check_meta(surface, dist.meta)
    return exceeds(surface, dist.quantile(level, "signed"), measure)


def exceeds(surface, threshold, measure="squared"):
    """Compare a surface with an absolute-coherence ``threshold``."""
    if measure == "squared":
        hit = surface.values ** 2 > threshold * threshold
    elif measure == "signed":
        hit = np.abs(surface.values) > threshold
    else:
        raise ParameterError(f"measure must be one of {MEASURES}")
    return np.ma.filled(hit, False).astype(bool)


def threshold_from_dict(doc, surface, level=0.99):
    """Absolute threshold at ``level`` from a serialised null, checked against ``surface``."""
    _check_meta(surface, doc.get("meta", {}))
    for entry in doc.get("quantiles", []):
        if abs(float(entry["level"]) - level) < 1e-12:
            return float(entry["abs"])
    raise ConfigurationError(f"null file has no quantile at level {level}")


def _curves(group, pair):
    if not group:
        raise ParameterError("empty group")
    times = group[0].times
    for s in group[1:]:
        if s.times.shape != times.shape or not np.array_equal(s.times, times):
            raise ConfigurationError("coherence surfaces are on different time grids")
    return np.ma.stack([s.curve(pair) for s in group]), times


def median_curve(group, pair):
    """Pointwise median over subjects, ignoring undefined values."""
    curves, _ = _curves(group, pair)
    return np.ma.median(curves, axis=0)


def _median_stat(a, b):
    d = np.ma.median(a, axis=-2) - np.ma.median(b, axis=-2)
    return np.ma.filled(np.ma.sum(d * d, axis=-1), 0.0)


def permutation_test(group_a, group_b, pair, n_perm=10_000, seed=0, measure="signed"):
    """Two-group permutation test on median coherence curves.

    The statistic is ``sum_t (median_a(t) - median_b(t))**2`` over times
    where both medians are defined; labels are shuffled ``n_perm`` times with
    group sizes preserved and ``p = (1 + #{T_perm >= T_obs}) / (n_perm + 1)``.
    ``measure="squared"`` compares squared coherence curves.
    """
    pair = Pair(*pair) if not isinstance(pair, str) else Pair.parse(pair)
    A, times_a = _curves(list(group_a), pair)
    B, times_b = _curves(list(group_b), pair)
    if not np.array_equal(times_a, times_b):
        raise ConfigurationError("groups are on different time grids")
    if measure == "squared":
        A, B = A ** 2, B ** 2
    # the two groups are placed in a canonical order so that swapping the
    # arguments reproduces the same permutations
    if (len(B), B.filled(np.nan).tobytes()) < (len(A), A.filled(np.nan).tobytes()):
        A, B = B, A
    pooled = np.ma.concatenate([A, B])
    n, na = len(pooled), len(A)
    if n < 2:
        raise ParameterError("need at least two curves in total")
    defined = ~np.ma.getmaskarray(np.ma.median(A, 0) - np.ma.median(B, 0))
    t_obs = float(_median_stat(A, B))
    rng = np.random.default_rng(int(seed))
    t_perm = np.empty(n_perm)
    batch = 256
    for start in range(0, n_perm, batch):
        m = min(batch, n_perm - start)
        idx = np.argsort(rng.random((m, n)), axis=1)
        shuffled = pooled[idx]
        t_perm[start:start + m] = _median_stat(shuffled[:, :na], shuffled[:, na:])
    count = int(np.count_nonzero(t_perm >= t_obs))
    p = (1 + count) / (n_perm + 1)
    diagnostics = {"undefined_points": int(np.count_nonzero(~defined)),
                   "group_sizes": (len(group_a), len(group_b))}
    return PermutationResult(t_obs, t_perm, p, int(n_perm), int(seed), diagnostics)
