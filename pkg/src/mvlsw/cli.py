"""Command-line entry point: ``mvlsw <subcommand> ...``.

Every subcommand writes its result file plus ``<out>.manifest.json``, which
records the resolved configuration, seed, input digests and library versions.
``mvlsw replay <manifest>`` reruns a command from that file alone.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigurationError, ParameterError
from .estimation import (
    coherence_estimate,
    estimate_spectrum,
    partial_windowed_coherence,
    windowed_coherence,
)
from .inference import exceeds, null_distribution, permutation_test, threshold_from_dict
from .process import (
    Ar2LatentSpec,
    simulate_design,
    simulate_mvlsw,
    spec_from_dict,
)
from .surfaces import MultichannelSeries, Pair, surface_from_tensor
from .wavelets import mra_decompose, parse_wavelet

log = logging.getLogger("mvlsw")

# flag name -> AnalysisConfig field
_CONFIG_FLAGS = {
    "levels": "levels", "wavelet": "wavelet", "window": "window", "step": "step",
    "lag": "lag", "lag_seconds": "lag_seconds", "M": "M", "pairs": "pairs",
    "controls": "controls", "nsim": "nsim", "nperm": "nperm", "quantiles": "quantiles",
    "level": "level", "seed": "seed", "sampling_rate": "sampling_rate", "fmax": "fmax",
}


def manifest_path(out):
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _load_input(path, cfg):
    series = io.load_csv(path, cfg.sampling_rate)
    cfg.check_channels(series.channels)
    return series


def _subprocesses(series, cfg):
    """``(J + 1, P, T)`` MRA components per channel (smooth last)."""
    filt = parse_wavelet(cfg.wavelet)
    return np.swapaxes(mra_decompose(series.values, filt, cfg.levels), 0, 1)


def _lag(cfg, rate):
    lag = cfg.lag_samples(rate)
    if cfg.lag_seconds is not None:
        log.info("lag %.6g s at %.6g Hz -> %d samples", cfg.lag_seconds, rate, lag)
    return lag


def _default_pairs(cfg, P, cross_only=True):
    J = cfg.levels
    return [Pair(j, p, jp, q) for j in range(1, J + 1) for jp in range(1, J + 1)
            for p in range(1, P + 1) for q in range(1, P + 1)
            if ((j, p) < (jp, q)) and (j != jp or not cross_only)]


# -- subcommands ---------------------------------------------------------------

def run_simulate(cfg, opts, model):
    kind = model.get("model", "mvlsw")
    if kind == "mvlsw":
        spec = spec_from_dict(model)
        T = opts.get("length") or model.get("length")
        if not T:
            raise ConfigurationError("simulate needs --length or a 'length' entry in the model")
        rate = float(opts.get("sampling_rate") or model.get("sampling_rate", 1.0))
        real = simulate_mvlsw(spec, int(T), cfg.seed)
        series = MultichannelSeries(real.series.values, rate)
    elif kind == "ar2_mixture":
        try:
            latents = [Ar2LatentSpec(**lat) for lat in model["latents"]]
            schedule = [[(float(s), w) for s, w in segs] for segs in model["schedule"]]
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad ar2_mixture model: {exc}") from None
        T = int(opts.get("length") or model.get("length", 1000))
        rate = float(opts.get("sampling_rate") or model.get("sampling_rate", 100.0))
        X = simulate_design(cfg.seed, n=1, T=T, sampling_rate=rate, latents=latents,
                            schedule=schedule)
        series = MultichannelSeries(X[0], rate)
    else:
        raise ConfigurationError(f"unknown model {kind!r}; expected 'mvlsw' or 'ar2_mixture'")
    io.write_series_csv(opts["out"], series)
    return {"length": series.length, "channels": series.channels}


def run_decompose(cfg, opts, model=None):
    series = _load_input(opts["input"], cfg)
    sub = _subprocesses(series, cfg)
    J = cfg.levels
    names, cols = [], []
    for p, name in enumerate(series.channel_names):
        for j in range(J + 1):
            names.append(f"{name}_D{j + 1}" if j < J else f"{name}_S{J}")
            cols.append(sub[j, p])
    io.write_series_csv(opts["out"], MultichannelSeries(np.array(cols), series.sampling_rate),
                        columns=names)
    return {"columns": len(names)}


def run_spectrum(cfg, opts, model=None):
    series = _load_input(opts["input"], cfg)
    spec = estimate_spectrum(series.values, parse_wavelet(cfg.wavelet), cfg.levels, cfg.M)
    pairs = cfg.pairs or _default_pairs(cfg, series.channels, cross_only=False) + [
        Pair(j, p, j, p) for j in range(1, cfg.levels + 1) for p in range(1, series.channels + 1)
    ]
    times = np.arange(series.length)
    surface = surface_from_tensor(spec.values, times, "spectrum", sorted(pairs),
                                  sampling_rate=series.sampling_rate)
    io.ResultTable.from_surface(surface).write_csv(opts["out"])
    return {"negative_diagonal": int(spec.diagnostics.get("negative_diagonal", 0))}


def _coherence_surface(series, cfg, method, lag):
    pairs = cfg.pairs or _default_pairs(cfg, series.channels)
    rate = series.sampling_rate
    if method == "spectral":
        if lag:
            raise ConfigurationError("spectral coherence is computed at lag 0")
        spec = estimate_spectrum(series.values, parse_wavelet(cfg.wavelet), cfg.levels, cfg.M)
        return replace(coherence_estimate(spec, pairs), sampling_rate=rate)
    sub = _subprocesses(series, cfg)
    if method == "windowed":
        if cfg.controls:
            raise ConfigurationError("--controls requires --method partial")
        return windowed_coherence(sub, pairs, cfg.window, cfg.step, lag, rate)
    if method == "partial":
        return partial_windowed_coherence(sub, pairs, cfg.controls, cfg.window, cfg.step, lag,
                                          rate)
    raise ConfigurationError(f"unknown method {method!r}")


def run_coherence(cfg, opts, model=None):
    series = _load_input(opts["input"], cfg)
    method = opts.get("method", "windowed")
    lag = _lag(cfg, series.sampling_rate)
    surface = _coherence_surface(series, cfg, method, lag)
    measure = "squared" if opts.get("squared") else "signed"
    extra = {"lag_samples": lag}
    significant = None
    if opts.get("thresholds") or cfg.nsim:
        if method == "spectral":
            raise ConfigurationError("null thresholds apply to windowed coherence only")
        if opts.get("thresholds"):
            thr = threshold_from_dict(io.read_json(opts["thresholds"]), surface, cfg.level)
        else:
            dist = null_distribution(cfg.levels, series.length, series.channels, cfg.window,
                                     cfg.step, cfg.nsim, cfg.seed, cfg.wavelet,
                                     list(surface.pairs), lag)
            thr = dist.quantile(cfg.level, "signed")
        significant = exceeds(surface, thr, measure)
        extra["threshold_abs"] = thr
        extra["threshold_squared"] = thr * thr
    table = io.ResultTable.from_surface(surface, significant, squared=measure == "squared")
    table.write_csv(opts["out"])
    return extra


def run_null_threshold(cfg, opts, model=None):
    if opts.get("input"):
        series = _load_input(opts["input"], cfg)
        T, P, rate = series.length, series.channels, series.sampling_rate
    else:
        T, P = opts.get("length"), opts.get("channels")
        if not T or not P:
            raise ConfigurationError("null-threshold needs --input or both --length and --channels")
        rate = cfg.sampling_rate or 1.0
    lag = _lag(cfg, rate)
    dist = null_distribution(cfg.levels, int(T), int(P), cfg.window, cfg.step,
                             cfg.nsim or 2000, cfg.seed, cfg.wavelet, cfg.pairs or None, lag,
                             levels=tuple(cfg.quantiles))
    io.write_json(opts["out"], dist.to_dict())
    return {"quantiles": dist.to_dict()["quantiles"]}


def run_permtest(cfg, opts, model=None):
    groups = []
    for key in ("group_a", "group_b"):
        files = opts.get(key) or []
        if not files:
            raise ConfigurationError(f"--{key.replace('_', '-')} needs at least one file")
        groups.append([_load_input(f, cfg) for f in files])
    rate = groups[0][0].sampling_rate
    lag = _lag(cfg, rate)
    surfaces = [[_coherence_surface(s, cfg, "windowed", lag) for s in g] for g in groups]
    measure = "squared" if opts.get("squared") else "signed"
    alpha = float(opts.get("alpha", 0.05))
    table = io.ResultTable()
    pvalues = {}
    for pair in surfaces[0][0].pairs:
        res = permutation_test(surfaces[0], surfaces[1], pair, cfg.nperm, cfg.seed, measure)
        for label, grp in (("median-a", surfaces[0]), ("median-b", surfaces[1])):
            med = np.ma.median(np.ma.stack([s.curve(pair, measure == "squared") for s in grp]), 0)
            for t, v in zip(grp[0].seconds, np.ma.getdata(med), strict=True):
                table.rows.append((float(t), pair.j, pair.jp, pair.p, pair.q, float(v), label, None))
        table.rows.append((None, pair.j, pair.jp, pair.p, pair.q, res.t_observed, "t-statistic",
                           None))
        table.rows.append((None, pair.j, pair.jp, pair.p, pair.q, res.p_value, "p-value",
                           res.p_value < alpha))
        pvalues[str(pair)] = res.p_value
    table.write_csv(opts["out"])
    return {"lag_samples": lag, "p_values": pvalues}


COMMANDS = {
    "simulate": run_simulate,
    "decompose": run_decompose,
    "spectrum": run_spectrum,
    "coherence": run_coherence,
    "null-threshold": run_null_threshold,
    "permtest": run_permtest,
}


# -- argument handling ---------------------------------------------------------

def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _analysis_flags(p, with_input=True):
    if with_input:
        p.add_argument("--input", help="CSV with header time,ch1,...")
    p.add_argument("--config", help="JSON analysis configuration")
    p.add_argument("--levels", type=int)
    p.add_argument("--wavelet", help="db1..db10 or haar")
    p.add_argument("--window", type=int)
    p.add_argument("--step", type=int)
    lag = p.add_mutually_exclusive_group()
    lag.add_argument("--lag", type=int, help="lag in samples")
    lag.add_argument("--lag-seconds", type=float)
    p.add_argument("-M", type=int, help="smoothing half-width")
    p.add_argument("--pairs", help="j:p-j':q[,...]")
    p.add_argument("--controls", help="j:p[,...] for partial coherence")
    p.add_argument("--nsim", type=int)
    p.add_argument("--nperm", type=int)
    p.add_argument("--quantiles", type=_floats)
    p.add_argument("--level", type=float, help="significance level (default 0.99)")
    p.add_argument("--sampling-rate", type=float, help="override the rate inferred from time")
    p.add_argument("--fmax", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="mvlsw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a realization from a model JSON")
    p.add_argument("--config", required=True, help="model JSON (mvlsw or ar2_mixture)")
    p.add_argument("--length", type=int)
    p.add_argument("--sampling-rate", type=float)

    p = sub.add_parser("decompose", help="wide CSV of per-scale components")
    _analysis_flags(p)
    p = sub.add_parser("spectrum", help="bias-corrected cross-scale spectrum")
    _analysis_flags(p)
    p = sub.add_parser("coherence", help="coherence curves with optional significance")
    _analysis_flags(p)
    p.add_argument("--method", choices=("windowed", "spectral", "partial"), default="windowed")
    p.add_argument("--squared", action="store_true")
    p.add_argument("--thresholds", help="JSON written by null-threshold")
    p = sub.add_parser("null-threshold", help="Monte-Carlo null quantiles")
    _analysis_flags(p)
    p.add_argument("--length", type=int)
    p.add_argument("--channels", type=int)
    p = sub.add_parser("permtest", help="two-group permutation test")
    _analysis_flags(p, with_input=False)
    p.add_argument("--group-a", nargs="+")
    p.add_argument("--group-b", nargs="+")
    p.add_argument("--squared", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)

    for p in sub.choices.values():
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to this path instead of the recorded one")
    return parser


def _resolve(args):
    """Merge defaults, the config file and explicit flags (flags win)."""
    doc = {}
    model = None
    if args.command == "simulate":
        model = io.read_json(args.config)
    elif getattr(args, "config", None):
        doc = io.read_json(args.config)
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
    for flag, key in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key in ("pairs", "controls"):
            value = [v for v in value.split(",") if v.strip()]
        doc[key] = value
    if "lag" in doc and getattr(args, "lag", None) is not None:
        doc.pop("lag_seconds", None)
    if getattr(args, "lag_seconds", None) is not None:
        doc.pop("lag", None)
    cfg = io.AnalysisConfig.from_dict(doc)
    opts = {}
    for key in ("input", "out", "method", "squared", "thresholds", "length", "channels",
                "group_a", "group_b", "alpha"):
        value = getattr(args, key, None)
        if value is None:
            continue
        if key in ("input", "out", "thresholds"):
            value = str(Path(value).resolve())
        elif key in ("group_a", "group_b"):
            value = [str(Path(v).resolve()) for v in value]
        opts[key] = value
    if args.command == "simulate" and args.sampling_rate is not None:
        opts["sampling_rate"] = args.sampling_rate
    return cfg, opts, model


def _input_files(opts):
    files = [opts[k] for k in ("input", "thresholds") if opts.get(k)]
    return files + list(opts.get("group_a", [])) + list(opts.get("group_b", []))


def execute(command, cfg, opts, model=None, argv=None):
    """Run one subcommand and write its manifest; returns the manifest dict."""
    inputs = {f: io.file_digest(f) for f in _input_files(opts)}
    result = COMMANDS[command](cfg, opts, model)
    if cfg.fmax is not None:
        result["bands_hz"] = {str(j): io.scale_to_band(cfg.fmax, j)
                              for j in range(1, cfg.levels + 1)}
    manifest = {
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "config": cfg.to_dict(),
        "options": opts,
        "model": model,
        "seed": cfg.seed,
        "inputs": inputs,
        "result": result,
        "versions": io.versions(),
    }
    io.write_json(manifest_path(opts["out"]), manifest)
    return manifest


def replay(path, out=None):
    """Rerun the command recorded in a manifest; input digests must match."""
    doc = io.read_json(path)
    try:
        command, opts = doc["command"], dict(doc["options"])
        cfg = io.AnalysisConfig.from_dict(doc["config"])
    except KeyError as exc:
        raise ConfigurationError(f"manifest lacks {exc}") from None
    if command not in COMMANDS:
        raise ConfigurationError(f"manifest names unknown command {command!r}")
    for f, digest in doc.get("inputs", {}).items():
        if io.file_digest(f) != digest:
            raise ConfigurationError(f"input {f} changed since the manifest was written")
    if out is not None:
        opts["out"] = str(Path(out).resolve())
    return execute(command, cfg, opts, doc.get("model"), doc.get("argv"))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="mvlsw: %(message)s")
    try:
        if args.command == "replay":
            replay(args.manifest, args.out)
        else:
            cfg, opts, model = _resolve(args)
            execute(args.command, cfg, opts, model, argv)
    except (ValueError, ArithmeticError, OSError, KeyError, ParameterError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"mvlsw {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
