"""Command-line interface for reproducible simulation campaigns.

Commands
--------
check             validity verdict for a (p, covariance) pair
simulate-gbp      binary-sequence paths + lag statistics
simulate-process  process paths + lag statistics (+ theory overlay)
simulate-field    lattice fields + correlogram (+ theory overlay)
analyze           lag statistics for an existing series/field CSV

All simulation commands require a seed and write byte-identical CSVs for
identical (config, seed), independent of the GBPF_THREADS parallelism
cap.  Exit codes: 0 ok, 1 validity failure, 2 usage/schema error,
3 runtime model failure (negative gap probability).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .covariance import CovarianceFunction, check_assumption
from .errors import CovarianceNotAdmissible, GbpfError, NegativeGapProbability
from .field import FieldSpec, simulate_field, theoretical_field_cov
from .gbp import GbpModel, sample_path
from .marginal import Continuous1D, Discrete1D, IntegerSet, IntervalUnion
from .output import heatmap_svg, line_chart_svg, read_csv, write_csv
from .partition import UserCells, build_partition
from .presets import preset, preset_names
from .process import ProcessSpec, simulate_process, theoretical_cov
from .stats import autocovariance, cross_covariance, field_correlogram, replicate_lag_stats

EXIT_OK = 0
EXIT_VALIDITY = 1
EXIT_USAGE = 2
EXIT_MODEL = 3

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None


class ConfigError(Exception):
    pass


_COV_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["exponential", "stretched", "two_exponential",
                            "power", "tabulated"]},
        "c": {"type": "number"}, "theta": {"type": "number"},
        "alpha": {"type": "number"}, "H": {"type": "number"},
        "c1": {"type": "number"}, "rho1": {"type": "number"},
        "c2": {"type": "number"}, "rho2": {"type": "number"},
        "values": {"type": "array", "items": {"type": "number"}},
        "tail": {"enum": ["geometric", "reject"]},
    },
    "required": ["family"],
}

_SET_SCHEMA = {
    "type": "object",
    "properties": {
        "intervals": {"type": "array",
                      "items": {"type": "array", "minItems": 2, "maxItems": 2}},
        "integers": {"type": "array", "items": {"type": "integer"}},
    },
}

_MARGINAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["exponential", "uniform", "normal", "binomial"]},
        "rate": {"type": "number"}, "lo": {"type": "number"},
        "hi": {"type": "number"}, "mu": {"type": "number"},
        "sigma": {"type": "number"}, "n": {"type": "integer"},
        "p": {"type": "number"},
    },
    "required": ["kind"],
}

_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "p": {"type": "number"},
        "covariance": _COV_SCHEMA,
        "marginal": _MARGINAL_SCHEMA,
        "set": _SET_SCHEMA,
        "partition": {
            "type": "object",
            "properties": {
                "probs": {"type": "array", "items": {"type": "number"}},
                "cells": {"type": "object"},
            },
            "required": ["probs", "cells"],
        },
        "n": {"type": "integer", "minimum": 1},
        "extents": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "seed": {"type": "integer", "minimum": 0},
        "replicates": {"type": "integer", "minimum": 1},
        "unchecked": {"type": "boolean"},
        "horizon": {"type": "integer", "minimum": 3},
        "max_lag": {"type": "integer", "minimum": 0},
        "window": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "svg": {"type": "boolean"},
        "input": {"type": "string"},
    },
    "additionalProperties": False,
}


def _load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
    if jsonschema is not None:
        try:
            jsonschema.validate(cfg, _CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"config schema violation: {e.message}") from None
    for key in ("seed", "out", "replicates", "preset"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "unchecked", False):
        cfg["unchecked"] = True
    return cfg


def _covariance_from_config(cov_cfg) -> CovarianceFunction:
    fam = cov_cfg["family"]
    try:
        if fam == "exponential":
            return CovarianceFunction.exponential(cov_cfg["c"], cov_cfg["theta"])
        if fam == "stretched":
            return CovarianceFunction.stretched_exponential(
                cov_cfg["c"], cov_cfg["theta"], cov_cfg["alpha"])
        if fam == "two_exponential":
            return CovarianceFunction.two_exponential(
                cov_cfg["c1"], cov_cfg["rho1"], cov_cfg["c2"], cov_cfg["rho2"])
        if fam == "power":
            return CovarianceFunction.power_law(cov_cfg["c"], cov_cfg["H"])
        if fam == "tabulated":
            return CovarianceFunction.tabulated(
                cov_cfg["values"], tail=cov_cfg.get("tail", "geometric"))
    except KeyError as e:
        raise ConfigError(f"covariance family {fam!r} is missing parameter {e}") from None
    raise ConfigError(f"unknown covariance family {fam!r}")


def _marginal_from_config(mc):
    kind = mc["kind"]
    if kind == "exponential":
        return Continuous1D.exponential(mc.get("rate", 1.0))
    if kind == "uniform":
        return Continuous1D.uniform(mc.get("lo", 0.0), mc.get("hi", 1.0))
    if kind == "normal":
        return Continuous1D.normal(mc.get("mu", 0.0), mc.get("sigma", 1.0))
    if kind == "binomial":
        return Discrete1D.binomial(mc["n"], mc["p"])
    raise ConfigError(f"unknown marginal kind {kind!r}")


def _set_from_config(sc):
    if "intervals" in sc:
        ivs = []
        for lo, hi in sc["intervals"]:
            ivs.append((-math.inf if lo is None else float(lo),
                        math.inf if hi is None else float(hi)))
        return IntervalUnion(ivs)
    if "integers" in sc:
        return IntegerSet(sc["integers"])
    raise ConfigError("set needs 'intervals' or 'integers'")


def _threads() -> int:
    raw = os.environ.get("GBPF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GBPF_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _replicate_rngs(seed, replicates):
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [np.random.default_rng(c) for c in children]


def _run_replicates(fn, rngs):
    """Run fn(index, rng) per replicate; order-stable, thread-count-independent."""
    workers = _threads()
    if workers == 1:
        return [fn(i, rng) for i, rng in enumerate(rngs)]
    out = [None] * len(rngs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, i, rng): i for i, rng in enumerate(rngs)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out


def _require_seed(cfg):
    if "seed" not in cfg:
        raise ConfigError("simulate commands require a seed")
    return int(cfg["seed"])


def _out_dir(cfg):
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _gbp_model(cfg) -> GbpModel:
    if "covariance" not in cfg or "p" not in cfg:
        raise ConfigError("a covariance block and p are required")
    cov = _covariance_from_config(cfg["covariance"])
    return GbpModel.create(cfg["p"], cov, unchecked=cfg.get("unchecked", False),
                           horizon=cfg.get("horizon", 10_000))


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_check(cfg) -> int:
    if "preset" in cfg:
        bundle = preset(cfg["preset"])
        gbps = bundle.spec.gbps if hasattr(bundle.spec, "gbps") else (bundle.spec.gbp,)
        reports = [g.validity for g in gbps]
    else:
        cov = _covariance_from_config(cfg.get("covariance") or {})
        if "p" not in cfg:
            raise ConfigError("check requires p")
        reports = [check_assumption(cov, cfg["p"], horizon=cfg.get("horizon", 10_000))]

    ok = all(r.passed for r in reports)
    gate_note = ""
    if not ok and cfg.get("unchecked", False):
        # Unchecked mode passes the gate when the gap law stays non-negative.
        try:
            if "preset" in cfg:
                for g in gbps:
                    g.gap_tables(cfg.get("horizon", 10_000))
            else:
                _gbp_model(cfg).gap_tables(cfg.get("horizon", 10_000))
            ok = True
            gate_note = "unchecked mode: gap law non-negative to horizon"
        except NegativeGapProbability as e:
            gate_note = f"unchecked mode: {e}"
    payload = {
        "pass": ok,
        "reports": [
            {
                "passed": r.passed,
                "horizon": r.horizon,
                "p": r.p,
                "violations": [
                    {"clause": v.clause, "witness_lag": v.witness_lag,
                     "lhs": v.lhs, "rhs": v.rhs}
                    for v in r.violations
                ],
            }
            for r in reports
        ],
        "note": gate_note,
    }
    for r in reports:
        print(r.describe())
    if gate_note:
        print(gate_note)
    if "out" in cfg:
        out = _out_dir(cfg)
        with open(os.path.join(out, "validity.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if ok else EXIT_VALIDITY


def _gate(model: GbpModel, cfg):
    if not model.validity.passed and not cfg.get("unchecked", False):
        raise CovarianceNotAdmissible(model.validity)


def cmd_simulate_gbp(cfg) -> int:
    seed = _require_seed(cfg)
    model = _gbp_model(cfg) if "preset" not in cfg else preset(cfg["preset"]).spec.gbp
    _gate(model, cfg)
    n = int(cfg.get("n", 2000))
    reps = int(cfg.get("replicates", 1))
    out = _out_dir(cfg)
    tables = model.gap_tables(n)
    max_lag = int(cfg.get("max_lag", min(20, max(1, n // 4 - 1))))

    def one(i, rng):
        path = sample_path(model, n, rng, tables=tables, seed=seed)
        return path.bits

    bits = _run_replicates(one, _replicate_rngs(seed, reps))
    stats = []
    for r, b in enumerate(bits):
        write_csv(os.path.join(out, f"gbp_r{r:03d}.csv"), ["t", "bit"],
                  [(t + 1, int(v)) for t, v in enumerate(b)])
        stats.append(autocovariance(b.astype(float), max_lag))
    agg = replicate_lag_stats(stats)
    theory = [model.p * (1 - model.p)] + [model.cov(k) for k in range(1, max_lag + 1)]
    write_csv(
        os.path.join(out, "stats.csv"), ["lag", "estimate", "se", "theory"],
        [(int(k), float(agg.estimates[i]),
          float(agg.se[i]) if reps > 1 else math.nan, theory[i])
         for i, k in enumerate(agg.lags)],
    )
    if cfg.get("svg", False):
        line_chart_svg(os.path.join(out, "stats.svg"), agg.lags,
                       {"estimate": agg.estimates, "theory": theory},
                       title="binary-sequence autocovariance")
    return EXIT_OK


def _process_spec(cfg) -> ProcessSpec:
    if "preset" in cfg:
        bundle = preset(cfg["preset"])
        if bundle.kind != "process":
            raise ConfigError(f"preset {bundle.name!r} is not a process preset")
        spec = bundle.spec
        if "n" in cfg:
            spec.n = int(cfg["n"])
        return spec
    marginal = _marginal_from_config(cfg.get("marginal") or {})
    if "set" not in cfg:
        raise ConfigError("simulate-process requires a set block or a preset")
    region = _set_from_config(cfg["set"])
    model = _gbp_model(cfg)
    return ProcessSpec(marginal, region, model, n=int(cfg.get("n", 2000)))


def cmd_simulate_process(cfg) -> int:
    seed = _require_seed(cfg)
    spec = _process_spec(cfg)
    _gate(spec.gbp, cfg)
    reps = int(cfg.get("replicates", 1))
    out = _out_dir(cfg)
    n = spec.n
    spec.gbp.gap_tables(n)
    max_lag = int(cfg.get("max_lag", min(20, max(1, n // 4 - 1))))

    def one(i, rng):
        return simulate_process(spec, rng, seed=seed)

    paths = _run_replicates(one, _replicate_rngs(seed, reps))
    header = ["t"] + [f"x{j + 1}" for j in range(spec.d)]
    stats = []
    cross = []
    for r, path in enumerate(paths):
        rows = [(t + 1, *path.values[t]) for t in range(n)]
        write_csv(os.path.join(out, f"series_r{r:03d}.csv"), header, rows)
        stats.append(autocovariance(path.values[:, 0], max_lag))
        if spec.d >= 2:
            cross.append(cross_covariance(path.values[:, 0], path.values[:, 1], max_lag))
    agg = replicate_lag_stats(stats)
    dmat = theoretical_cov(spec)
    var0 = float(spec.marginal.covariance()[0, 0])
    theory = [var0] + [dmat[0, 0] * spec.gbp.cov(k) for k in range(1, max_lag + 1)]
    write_csv(
        os.path.join(out, "stats.csv"), ["lag", "estimate", "se", "theory"],
        [(int(k), float(agg.estimates[i]),
          float(agg.se[i]) if reps > 1 else math.nan, theory[i])
         for i, k in enumerate(agg.lags)],
    )
    if cross:
        aggx = replicate_lag_stats(cross)
        var01 = float(spec.marginal.covariance()[0, 1])
        theoryx = [var01] + [dmat[0, 1] * spec.gbp.cov(k) for k in range(1, max_lag + 1)]
        write_csv(
            os.path.join(out, "cross_stats.csv"), ["lag", "estimate", "se", "theory"],
            [(int(k), float(aggx.estimates[i]),
              float(aggx.se[i]) if reps > 1 else math.nan, theoryx[i])
             for i, k in enumerate(aggx.lags)],
        )
    if cfg.get("svg", False):
        line_chart_svg(os.path.join(out, "stats.svg"), agg.lags,
                       {"estimate": agg.estimates, "theory": theory},
                       title="process autocovariance")
    return EXIT_OK


def _field_spec(cfg) -> FieldSpec:
    if "preset" in cfg:
        bundle = preset(cfg["preset"])
        if bundle.kind != "field":
            raise ConfigError(f"preset {bundle.name!r} is not a field preset")
        spec = bundle.spec
        if "extents" in cfg:
            spec.extents = tuple(int(t) for t in cfg["extents"])
        return spec
    if "partition" not in cfg or "marginal" not in cfg:
        raise ConfigError("simulate-field requires a preset or marginal+partition blocks")
    marginal = _marginal_from_config(cfg["marginal"])
    pc = cfg["partition"]
    probs = tuple(pc["probs"])
    cells = {}
    for key, sc in pc["cells"].items():
        bits = tuple(int(ch) for ch in key)
        cells[bits] = _set_from_config(sc)
    part = build_partition(marginal, probs, UserCells(cells))
    cov = _covariance_from_config(cfg["covariance"]) if "covariance" in cfg else None
    if cov is None:
        raise ConfigError("simulate-field config needs a covariance block")
    gbps = tuple(
        GbpModel.create(p, cov, unchecked=cfg.get("unchecked", False)) for p in probs
    )
    extents = tuple(int(t) for t in cfg.get("extents", [100] * len(probs)))
    return FieldSpec(marginal, part, gbps, extents)


def cmd_simulate_field(cfg) -> int:
    seed = _require_seed(cfg)
    spec = _field_spec(cfg)
    for g in spec.gbps:
        _gate(g, cfg)
    reps = int(cfg.get("replicates", 1))
    out = _out_dir(cfg)
    for g, t in zip(spec.gbps, spec.extents):
        g.gap_tables(t)
    window = tuple(cfg.get("window", [min(5, t // 4) for t in spec.extents]))

    def one(i, rng):
        return simulate_field(spec, rng, seed=seed)

    fields = _run_replicates(one, _replicate_rngs(seed, reps))
    header = [f"t{j + 1}" for j in range(spec.n)] + [f"x{j + 1}" for j in range(spec.d)]
    grams = []
    for r, fs in enumerate(fields):
        rows = []
        for idx in np.ndindex(*spec.extents):
            rows.append(tuple(i + 1 for i in idx) + tuple(fs.values[idx]))
        write_csv(os.path.join(out, f"field_r{r:03d}.csv"), header, rows)
        grams.append(field_correlogram(fs.values[..., 0], window))
    lags = sorted(grams[0])
    est = np.asarray([[g[lag] for g in grams] for lag in lags])
    mean = est.mean(axis=1)
    se = est.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(len(lags), math.nan)
    theory = [float(theoretical_field_cov(spec, lag)[0, 0]) for lag in lags]
    write_csv(
        os.path.join(out, "correlogram.csv"),
        [f"lag{j + 1}" for j in range(spec.n)] + ["estimate", "se", "theory"],
        [tuple(int(v) for v in lag) + (mean[i], se[i], theory[i])
         for i, lag in enumerate(lags)],
    )
    if cfg.get("svg", False) and spec.n == 2:
        w1, w2 = window
        grid = np.asarray(mean).reshape(2 * w1 + 1, 2 * w2 + 1)
        heatmap_svg(os.path.join(out, "correlogram.svg"), grid, title="field correlogram")
        heatmap_svg(os.path.join(out, "field.svg"), fields[0].values[..., 0],
                    title="field sample (replicate 0)")
    return EXIT_OK


def cmd_analyze(cfg) -> int:
    if "input" not in cfg:
        raise ConfigError("analyze requires an input CSV path")
    try:
        header, data = read_csv(cfg["input"])
    except OSError as e:
        raise ConfigError(f"cannot read input: {e}") from None
    out = _out_dir(cfg)
    axis_cols = [c for c in header if c.startswith("t")]
    val_cols = [c for c in header if c.startswith("x") or c == "bit"]
    if not axis_cols or not val_cols:
        raise ConfigError("input is missing t/x columns")

    theory_spec = None
    if "preset" in cfg:
        theory_spec = preset(cfg["preset"]).spec
    elif "covariance" in cfg and "p" in cfg and "marginal" in cfg and "set" in cfg:
        theory_spec = _process_spec(cfg)

    if len(axis_cols) == 1:
        series = data[:, len(axis_cols):]
        n = series.shape[0]
        max_lag = int(cfg.get("max_lag", min(20, max(1, n // 4 - 1))))
        try:
            stats = autocovariance(series[:, 0], max_lag)
        except GbpfError as e:
            raise ConfigError(str(e)) from None
        rows = []
        theory = None
        if theory_spec is not None and isinstance(theory_spec, ProcessSpec):
            dmat = theoretical_cov(theory_spec)
            var0 = float(theory_spec.marginal.covariance()[0, 0])
            theory = [var0] + [dmat[0, 0] * theory_spec.gbp.cov(k)
                               for k in range(1, max_lag + 1)]
        for i, k in enumerate(stats.lags):
            row = [int(k), float(stats.estimates[i])]
            if theory is not None:
                row.append(theory[i])
            rows.append(row)
        write_csv(os.path.join(out, "analysis.csv"),
                  ["lag", "estimate"] + (["theory"] if theory else []), rows)
        return EXIT_OK

    # field input: reshape by the axis columns
    n_axes = len(axis_cols)
    extents = tuple(int(data[:, j].max()) for j in range(n_axes))
    values = np.full(extents, math.nan)
    idx = tuple(data[:, j].astype(int) - 1 for j in range(n_axes))
    values[idx] = data[:, n_axes]
    if np.any(np.isnan(values)):
        raise ConfigError("field input does not cover the full lattice")
    window = cfg.get("window")
    if window is None:
        window = [min(5, t // 4) for t in extents]
    try:
        gram = field_correlogram(values, tuple(window))
    except GbpfError as e:
        raise ConfigError(str(e)) from None
    lags = sorted(gram)
    rows = []
    theory_fn = None
    if theory_spec is not None and isinstance(theory_spec, FieldSpec):
        theory_fn = lambda lag: float(theoretical_field_cov(theory_spec, lag)[0, 0])
    for lag in lags:
        row = list(int(v) for v in lag) + [gram[lag]]
        if theory_fn is not None:
            row.append(theory_fn(lag))
        rows.append(row)
    write_csv(
        os.path.join(out, "analysis.csv"),
        [f"lag{j + 1}" for j in range(n_axes)] + ["estimate"]
        + (["theory"] if theory_fn else []),
        rows,
    )
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "simulate-gbp": cmd_simulate_gbp,
    "simulate-process": cmd_simulate_process,
    "simulate-field": cmd_simulate_field,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gbpf",
        description="Stationary processes and random fields with prescribed "
                    "marginals driven by correlated binary sequences.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="RNG seed (required to simulate)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--replicates", type=int, help="number of replicate runs")
        p.add_argument("--unchecked", action="store_true",
                       help="bypass the admissibility gate; the gap law is "
                            "still required to stay non-negative")
        p.add_argument("--preset", choices=preset_names(), help="named configuration")
        if name == "analyze":
            p.add_argument("--input", help="series/field CSV to analyze")
            p.add_argument("--max-lag", dest="max_lag", type=int)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _load_config(args)
        for key in ("input", "max_lag"):
            v = getattr(args, key, None)
            if v is not None:
                cfg[key] = v
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CovarianceNotAdmissible as e:
        print(f"validity failure: {e}", file=sys.stderr)
        return EXIT_VALIDITY
    except NegativeGapProbability as e:
        print(f"model failure: {e}", file=sys.stderr)
        return EXIT_MODEL
    except GbpfError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
