"""File formats, analysis configuration and small domain utilities."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigurationError, DomainError, ParameterError, ParseError
from .surfaces import MultichannelSeries, parse_pairs

RESULT_COLUMNS = ("time", "j", "jprime", "p", "q", "value", "kind", "significant")


def load_csv(path, sampling_rate=None):
    """Read ``time,ch1,...,chP`` into a :class:`MultichannelSeries`.

    The sampling rate is the reciprocal of the (uniform) time step unless
    ``sampling_rate`` overrides it.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "time":
            raise ParseError("header must be 'time,ch1,...'", 1)
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ParseError(f"non-numeric cell {bad!r}", line) from None
            if not all(math.isfinite(v) for v in rows[-1]):
                raise ParseError("non-finite value", line)
    if not rows:
        raise ParseError("no data rows", 2)
    data = np.array(rows)
    t = data[:, 0]
    if len(t) > 1:
        steps = np.diff(t)
        step = steps[0]
        if step <= 0:
            raise ParseError("time column must increase", 3)
        off = np.nonzero(np.abs(steps - step) > 1e-6 * abs(step))[0]
        if len(off):
            raise ParseError("non-uniform time step", int(off[0]) + 3)
        rate = 1.0 / step
    else:
        rate = 1.0
    if sampling_rate is not None:
        rate = float(sampling_rate)
    return MultichannelSeries(data[:, 1:].T.copy(), rate, tuple(header[1:]))


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _fmt(v):
    return repr(float(v))


def write_series_csv(path, series, columns=None):
    """Write a ``time,<columns>`` file; ``series`` is a MultichannelSeries."""
    names = columns or series.channel_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", *names])
        for t, row in zip(series.times, series.values.T):
            w.writerow([_fmt(t), *(_fmt(v) for v in row)])


def scale_to_band(fmax, j):
    """Frequency band ``(fmax / 2**j, fmax / 2**(j-1))`` captured by scale ``j``."""
    if fmax <= 0:
        raise ParameterError("fmax must be positive")
    if j < 1:
        raise ParameterError("scale must be >= 1")
    return fmax / 2 ** j, fmax / 2 ** (j - 1)


def log_return(prices, n=1):
    """Percent log return over ``n`` periods, ``100 ln(V_t / V_{t-n}) / n``.

    The first ``n`` outputs are masked.
    """
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    n = int(n)
    v = np.asarray(prices, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("prices must be strictly positive")
    out = np.ma.masked_all(v.shape)
    if len(v) > n:
        out[n:] = 100.0 * np.log(v[n:] / v[:-n]) / n
    return out


# -- result tables -----------------------------------------------------------

@dataclass
class ResultTable:
    """Long-format rows ``(time, j, jprime, p, q, value, kind, significant)``.

    ``time``, ``value`` and ``significant`` may be ``None`` (written as empty
    cells); summary rows such as p-values carry no time.
    """

    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_surface(cls, surface, significant=None, squared=False, seconds=True):
        table = cls()
        table.extend_surface(surface, significant, squared, seconds)
        return table

    def extend_surface(self, surface, significant=None, squared=False, seconds=True):
        vals = surface.squared if squared else surface.values
        times = surface.seconds if seconds else surface.times
        kind = surface.kind + ("-squared" if squared else "")
        mask = np.ma.getmaskarray(vals)
        for i, pair in enumerate(surface.pairs):
            for n, t in enumerate(times):
                value = None if mask[i, n] else float(vals[i, n])
                sig = None if significant is None else bool(significant[i, n])
                self.rows.append((float(t), pair.j, pair.jp, pair.p, pair.q, value, kind, sig))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for t, j, jp, p, q, value, kind, sig in self.rows:
                w.writerow(["" if t is None else _fmt(t), j, jp, p, q, "" if value is None else _fmt(value), kind,
                            "" if sig is None else str(bool(sig)).lower()])

    @classmethod
    def read_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != RESULT_COLUMNS:
                raise ParseError(f"header must be {','.join(RESULT_COLUMNS)}", 1)
            for line, row in enumerate(reader, start=2):
                if len(row) != len(RESULT_COLUMNS):
                    raise ParseError(f"expected {len(RESULT_COLUMNS)} fields", line)
                try:
                    t, j, jp, p, q, value, kind, sig = row
                    rows.append((None if t == "" else float(t), int(j), int(jp), int(p), int(q),
                                 None if value == "" else float(value), kind,
                                 None if sig == "" else sig == "true"))
                except ValueError as exc:
                    raise ParseError(str(exc), line) from None
        return cls(rows)


# -- configuration -------------------------------------------------------------

@dataclass
class AnalysisConfig:
    """Settings shared by the analysis subcommands.

    ``lag`` is in samples; ``lag_seconds`` (when set) takes precedence and is
    converted with the sampling rate.
    """

    wavelet: str = "db2"
    levels: int = 4
    window: int = 50
    step: int = 10
    lag: int = 0
    lag_seconds: float | None = None
    M: int = 16
    pairs: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    quantiles: list = field(default_factory=lambda: [0.95, 0.99, 0.999])
    level: float = 0.99
    seed: int = 0
    sampling_rate: float | None = None
    fmax: float | None = None
    nsim: int | None = None
    nperm: int = 10_000

    def __post_init__(self):
        self.pairs = parse_pairs(self.pairs)
        self.controls = [tuple(int(v) for v in str(c).split(":")) if isinstance(c, str)
                         else tuple(c) for c in self.controls]
        self.validate()

    def validate(self):
        for name in ("levels", "window", "step"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.M < 0 or self.nperm < 1:
            raise ConfigurationError("M must be >= 0 and nperm >= 1")
        if self.nsim is not None and self.nsim < 100:
            raise ConfigurationError("nsim must be at least 100")
        if self.sampling_rate is not None and self.sampling_rate <= 0:
            raise ConfigurationError("sampling_rate must be positive")
        if self.fmax is not None and self.fmax <= 0:
            raise ConfigurationError("fmax must be positive")
        if any(not 0 < q < 1 for q in [*self.quantiles, self.level]):
            raise ConfigurationError("quantiles must lie in (0, 1)")
        for pair in self.pairs:
            if max(pair.j, pair.jp) > self.levels:
                raise ConfigurationError(f"pair {pair} uses a scale above levels={self.levels}")

    def check_channels(self, P):
        for pair in self.pairs:
            if max(pair.p, pair.q) > P:
                raise ConfigurationError(f"pair {pair} references channel beyond {P}")
        for j, p in self.controls:
            if p > P or j > self.levels:
                raise ConfigurationError(f"control {j}:{p} out of range")

    def lag_samples(self, sampling_rate):
        if self.lag_seconds is None:
            return int(self.lag)
        return int(round(self.lag_seconds * sampling_rate))

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self):
        doc = asdict(self)
        doc["pairs"] = [str(p) for p in self.pairs]
        doc["controls"] = [f"{j}:{p}" for j, p in self.controls]
        return doc


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def versions():
    import scipy

    return {"mvlsw": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from None
