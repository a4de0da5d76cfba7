"""Data containers shared by simulation, estimation and inference."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ParameterError


class Pair(NamedTuple):
    """Subprocess pair: scale ``j`` of channel ``p`` against scale ``jp`` of channel ``q``.

    All indices are 1-based.
    """

    j: int
    p: int
    jp: int
    q: int

    def __str__(self):
        return f"{self.j}:{self.p}-{self.jp}:{self.q}"

    @classmethod
    def parse(cls, text):
        try:
            left, right = str(text).strip().split("-")
            j, p = (int(v) for v in left.split(":"))
            jp, q = (int(v) for v in right.split(":"))
        except ValueError:
            raise ParameterError(f"bad pair {text!r}; expected j:p-j':q") from None
        if min(j, p, jp, q) < 1:
            raise ParameterError(f"pair indices are 1-based, got {text!r}")
        return cls(j, p, jp, q)

    def swapped(self):
        return Pair(self.jp, self.q, self.j, self.p)


def parse_pairs(text):
    """Parse ``"j:p-j':q,..."`` into a list of :class:`Pair`."""
    if isinstance(text, (list, tuple)):
        return [p if isinstance(p, Pair) else Pair.parse(p) if isinstance(p, str) else Pair(*p)
                for p in text]
    return [Pair.parse(item) for item in str(text).split(",") if item.strip()]


@dataclass(frozen=True, eq=False)
class MultichannelSeries:
    values: np.ndarray
    sampling_rate: float = 1.0
    channel_names: tuple = ()

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        if not self.channel_names:
            names = tuple(f"ch{i + 1}" for i in range(v.shape[0]))
            object.__setattr__(self, "channel_names", names)
        if self.sampling_rate <= 0:
            raise ParameterError("sampling_rate must be positive")

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def length(self):
        return self.values.shape[1]

    @property
    def times(self):
        return np.arange(self.length) / self.sampling_rate


@dataclass(frozen=True, eq=False)
class CrossScaleSpectrum:
    """``values[j-1, j'-1, p-1, q-1, n]`` is ``S_{jj'}^{(p,q)}`` at ``u_grid[n]``."""

    values: np.ndarray
    u_grid: np.ndarray
    estimated: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def levels(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[2]

    def entry(self, j, jp, p, q):
        return self.values[j - 1, jp - 1, p - 1, q - 1]


@dataclass(frozen=True, eq=False)
class CoherenceSurface:
    """Time-indexed coherence curves for a list of subprocess pairs.

    ``values`` is a masked array of shape ``(len(pairs), len(times))`` holding
    signed coherence; masked entries are undefined.  ``times`` are sample
    indices (window centres for windowed kinds).
    """

    pairs: tuple
    values: np.ma.MaskedArray
    times: np.ndarray
    kind: str
    lag: int = 0
    window: int | None = None
    step: int | None = None
    sampling_rate: float = 1.0
    thresholds: dict | None = None

    def __post_init__(self):
        vals = np.ma.masked_invalid(np.ma.asarray(self.values, dtype=float))
        vals = np.ma.array(vals, mask=np.ma.getmaskarray(vals))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "pairs", tuple(Pair(*p) for p in self.pairs))
        object.__setattr__(self, "times", np.asarray(self.times))

    @property
    def squared(self):
        return self.values ** 2

    @property
    def seconds(self):
        return self.times / self.sampling_rate

    def index(self, pair):
        pair = Pair(*pair)
        try:
            return self.pairs.index(pair)
        except ValueError:
            raise KeyError(f"pair {pair} not in surface") from None

    def curve(self, pair, squared=False):
        row = self.values[self.index(pair)]
        return row ** 2 if squared else row

    def with_thresholds(self, thresholds):
        return replace(self, thresholds=dict(thresholds))


def coherence_from_spectrum(values, floor=1e-12):
    """Normalise a ``(J, J, P, P, n)`` spectrum tensor to coherence.

    Entries whose diagonal normaliser is at or below ``floor`` times the
    largest diagonal value (including negative estimates) are masked.
    """
    values = np.asarray(values, dtype=float)
    J, _, P, _, _ = values.shape
    diag = np.stack([np.stack([values[j, j, p, p] for p in range(P)]) for j in range(J)])
    cutoff = floor * max(float(np.max(diag)), 0.0)
    bad = ~(diag > cutoff) | ~np.isfinite(diag)
    safe = np.where(bad, 1.0, diag)
    root = np.sqrt(safe)
    denom = root[:, None, :, None, :] * root[None, :, None, :, :]
    rho = np.clip(values / denom, -1.0, 1.0)
    mask = bad[:, None, :, None, :] | bad[None, :, None, :, :]
    for j in range(J):
        for p in range(P):
            rho[j, j, p, p] = 1.0
    rho = np.ma.array(rho, mask=mask | ~np.isfinite(values))
    return rho, int(np.count_nonzero(diag < 0))


def surface_from_tensor(rho, times, kind, pairs=None, **kwargs):
    """Flatten a ``(J, J, P, P, n)`` coherence tensor into a surface."""
    J, _, P, _, _ = rho.shape
    if pairs is None:
        pairs = [Pair(j, p, jp, q) for j in range(1, J + 1) for jp in range(1, J + 1)
                 for p in range(1, P + 1) for q in range(1, P + 1)]
    pairs = [Pair(*p) for p in pairs]
    for pr in pairs:
        if not (1 <= pr.j <= J and 1 <= pr.jp <= J and 1 <= pr.p <= P and 1 <= pr.q <= P):
            raise ParameterError(f"pair {pr} outside J={J}, P={P}")
    rows = np.ma.stack([rho[pr.j - 1, pr.jp - 1, pr.p - 1, pr.q - 1] for pr in pairs])
    return CoherenceSurface(tuple(pairs), rows, times, kind, **kwargs)
