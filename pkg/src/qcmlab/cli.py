"""Batch experiment front end.

Subcommands: dim, words, discretize, estimate, scaling, multiplicity,
counterexample, families.  Each run writes a versioned CSV report plus a
JSON summary with machine-readable invariant verdicts into the output
directory.  Outputs are deterministic for a fixed (config, seed); the worker
pool only parallelizes independent grid jobs and results are merged in grid
order before writing.

Exit codes: 0 success, 2 configuration error, 3 invariant failure,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conjectures import diagonal_family_check, pair_sum_scan, uniform_families
from .errors import (
    BoundChainViolation,
    ConfigError,
    QcmlabError,
    ResourceCapError,
)
from .fractal import (
    FIXTURE_NAMES,
    diameter_bound,
    resolve_system,
    stopping_set,
)
from .modulus import (
    ampliation_statistic,
    base_commutator_spectrum,
    multiplicity_experiment,
    scaling_experiment,
    upper_statistic,
)
from .operators import (
    MultiplicityAssignment,
    discretize,
    model_dump_rows,
    word_label,
)

REPORT_VERSION = "qcmlab-report v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_RESOURCE = 4

KINDS = ("dim", "words", "discretize", "estimate", "scaling",
         "multiplicity", "counterexample", "families")


@dataclass
class ExperimentConfig:
    kind: str
    fixture: str | None = None
    level: int | None = None
    r_grid: tuple[float, ...] = ()
    p_override: float | None = None
    ratios: tuple[float, ...] = ()
    words: tuple[tuple[int, ...], ...] = ()
    pieces: tuple[tuple[tuple[int, ...], int], ...] = ()
    sizes: tuple[int, ...] = ()
    window: int = 8
    output: str = "."
    workers: int = 1
    seed: int = 0


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str


def validate(config: ExperimentConfig) -> list[Diagnostic]:
    """All configuration violations at once; performs no work."""
    diags: list[Diagnostic] = []

    def err(msg):
        diags.append(Diagnostic("error", msg))

    if config.kind not in KINDS:
        err(f"unknown experiment kind {config.kind!r}")
        return diags
    if config.workers < 1:
        err("workers must be >= 1")
    if config.kind == "dim":
        if len(config.ratios) < 2:
            err("dim needs at least two ratios")
        elif any(not 0.0 < x < 1.0 for x in config.ratios):
            err("ratios must lie in (0, 1)")
        return diags

    ifs = None
    if config.fixture is None:
        err("a fixture name or system config path is required")
    else:
        try:
            ifs = resolve_system(config.fixture)
        except ConfigError as exc:
            err(str(exc))

    needs_level = config.kind in ("discretize", "estimate", "scaling",
                                  "multiplicity", "families")
    if needs_level and (config.level is None or config.level < 0):
        err(f"{config.kind} needs a nonnegative level")
    needs_r = config.kind in ("words", "estimate", "scaling", "multiplicity",
                              "families")
    if needs_r and not config.r_grid:
        err(f"{config.kind} needs a resolution grid")
    for r in config.r_grid:
        if r < 1.0:
            err(f"resolutions must be >= 1, got {r}")
    if ifs is not None and config.level is not None and needs_r:
        deepest = max(ifs.maps, key=lambda f: f.ratio).ratio
        for r in config.r_grid:
            depth = 0 if r <= 1.0 else math.ceil(math.log(r) / math.log(1.0 / deepest))
            while deepest ** depth > 1.0 / r:  # guard rounding at the boundary
                depth += 1
            if depth > config.level:
                err(f"resolution {r} needs stopping depth {depth} "
                    f"> level {config.level}")
    if config.kind in ("estimate", "scaling", "multiplicity", "families",
                       "counterexample"):
        p = config.p_override
        if p is None and ifs is not None and config.kind != "counterexample":
            p = ifs.hausdorff_dim
        if config.kind == "counterexample" and p is None:
            err("counterexample needs an explicit p > 1")
        if p is not None and p <= 1.0:
            err(f"modulus statistics require p > 1, got p = {p}")
    if config.kind == "scaling" and not config.words:
        err("scaling needs at least one word")
    if config.kind == "multiplicity" and not config.pieces:
        err("multiplicity needs at least one piece")
    if config.kind == "families" and not config.sizes:
        err("families needs a list of sizes")
    if config.kind == "counterexample" and config.window < 0:
        err("window must be >= 0")
    return diags


# --------------------------------------------------------------------------
# deterministic writers


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {REPORT_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# grid jobs (module level so they pickle for the worker pool)


def _estimate_job(args):
    fixture, level, r, p = args
    model = discretize(resolve_system(fixture), level)
    stat = upper_statistic(model, r, p)
    return stat


def _scaling_job(args):
    fixture, letters, level, r, p = args
    ifs = resolve_system(fixture)
    return scaling_experiment(ifs, letters, level, r, p)


def _map_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# --------------------------------------------------------------------------
# runners


def _run_dim(config: ExperimentConfig) -> int:
    from .fractal import moran_dimension

    p = moran_dimension(config.ratios)
    print(f"{p:.10f}")
    return EXIT_OK


def _run_words(config: ExperimentConfig, out: Path) -> int:
    ifs = resolve_system(config.fixture)
    rows = []
    for r in config.r_grid:
        ss = stopping_set(ifs, r)
        for w in ss.words:
            rows.append((config.fixture, r, word_label(w.letters),
                         w.ratio_product, w.measure_weight))
    _write_csv(out / "words.csv",
               ["fixture", "r", "word", "ratio", "weight"], rows)
    _write_json(out / "words_summary.json", {
        "kind": "words", "fixture": config.fixture,
        "r_grid": list(config.r_grid), "rows": len(rows), "seed": config.seed,
    })
    print(f"words: {len(rows)} rows -> {out / 'words.csv'}")
    return EXIT_OK


def _run_discretize(config: ExperimentConfig, out: Path) -> int:
    ifs = resolve_system(config.fixture)
    model = discretize(ifs, config.level)
    header = ["word", "weight"] + [f"x_{i+1}" for i in range(model.n_coords)]
    _write_csv(out / "discretize.csv", header, model_dump_rows(model))
    _write_json(out / "discretize_summary.json", {
        "kind": "discretize", "fixture": config.fixture,
        "level": config.level, "dimension": model.dim, "seed": config.seed,
    })
    print(f"discretize: dimension {model.dim} -> {out / 'discretize.csv'}")
    return EXIT_OK


def _run_estimate(config: ExperimentConfig, out: Path) -> int:
    jobs = [(config.fixture, config.level, r, config.p_override)
            for r in config.r_grid]
    try:
        stats = _map_jobs(_estimate_job, jobs, config.workers)
    except BoundChainViolation as exc:
        print(f"bound chain violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    base = stats[0].u_tilde
    rows = []
    verdicts = []
    for stat in stats:
        ratio = stat.u_tilde / base if base > 0 else float("nan")
        rows.append((stat.fixture, stat.level, stat.r, stat.rank,
                     stat.sup_norm, stat.u_lorentz, stat.u_tilde,
                     stat.bound_rank, stat.bound_count, stat.bound_const,
                     ratio))
        verdicts.append({
            "r": stat.r,
            "chain_ok": True,
            "supnorm_slack": 2.0 * stat.diam / stat.r - stat.sup_norm,
            "rank_slack": stat.bound_rank - stat.u_lorentz,
            "count_slack": stat.bound_count - stat.bound_rank,
            "const_slack": stat.bound_const - stat.bound_count,
            "rank_le_omega": stat.rank <= stat.omega,
        })
    _write_csv(out / "estimate.csv",
               ["fixture", "level", "r", "rank", "sup_norm", "u_lorentz",
                "u_tilde", "bound_rank", "bound_count", "bound_const",
                "ratio_to_base"], rows)
    ok = all(v["rank_le_omega"] for v in verdicts)
    _write_json(out / "estimate_summary.json", {
        "kind": "estimate", "fixture": config.fixture, "level": config.level,
        "p_override": config.p_override, "r_grid": list(config.r_grid),
        "seed": config.seed, "normalization": stats[0].normalization,
        "verdicts": verdicts, "all_ok": ok,
    })
    print(f"estimate: {len(rows)} rows -> {out / 'estimate.csv'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def _run_scaling(config: ExperimentConfig, out: Path) -> int:
    jobs = [(config.fixture, letters, config.level, r, config.p_override)
            for letters in config.words for r in config.r_grid]
    reports = _map_jobs(_scaling_job, jobs, config.workers)
    rows = []
    worst = 0.0
    for rep in reports:
        rows.append((rep.fixture, word_label(rep.word), rep.level, rep.r,
                     rep.expected_ratio, rep.base_stat, rep.cylinder_stat,
                     rep.ratio, rep.rel_error))
        if not math.isnan(rep.rel_error):
            worst = max(worst, rep.rel_error)
    _write_csv(out / "scaling.csv",
               ["fixture", "word", "level", "r", "expected_ratio",
                "base_stat", "cylinder_stat", "ratio", "rel_error"], rows)
    ok = worst <= 1e-9
    _write_json(out / "scaling_summary.json", {
        "kind": "scaling", "fixture": config.fixture, "level": config.level,
        "seed": config.seed, "worst_rel_error": worst, "all_ok": ok,
    })
    print(f"scaling: {len(rows)} rows, worst relative error {worst:.3e}")
    return EXIT_OK if ok else EXIT_INVARIANT


def _run_multiplicity(config: ExperimentConfig, out: Path) -> int:
    ifs = resolve_system(config.fixture)
    model = discretize(ifs, config.level)
    assignment = MultiplicityAssignment(
        tuple(((prefix,), mult) for prefix, mult in config.pieces))
    rows = []
    verdicts = []
    for r in config.r_grid:
        rep = multiplicity_experiment(model, assignment, r, config.p_override)
        for block in rep.blocks:
            rows.append((rep.fixture, rep.level, rep.r,
                         "+".join(word_label(q) for q in block.prefixes),
                         block.multiplicity, block.measure, block.stat,
                         rep.total_stat, rep.total_stat_pow,
                         rep.integral_proxy))
        verdicts.append({"r": rep.r, "sandwich_ok": rep.sandwich_ok,
                         "total_stat": rep.total_stat,
                         "integral_proxy": rep.integral_proxy})
    _write_csv(out / "multiplicity.csv",
               ["fixture", "level", "r", "prefixes", "multiplicity",
                "measure", "block_stat", "total_stat", "total_stat_pow",
                "integral_proxy"], rows)
    ok = all(v["sandwich_ok"] for v in verdicts)
    _write_json(out / "multiplicity_summary.json", {
        "kind": "multiplicity", "fixture": config.fixture,
        "level": config.level, "seed": config.seed,
        "verdicts": verdicts, "all_ok": ok,
    })
    print(f"multiplicity: {len(rows)} rows -> {out / 'multiplicity.csv'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def _run_counterexample(config: ExperimentConfig, out: Path) -> int:
    report = pair_sum_scan(config.p_override, window=config.window)
    _write_csv(out / "counterexample.csv",
               ["p", "l", "d", "value", "rhs", "margin"], report.rows())
    _write_json(out / "counterexample_summary.json", {
        "kind": "counterexample",
        "note": ("offset scan over subsequences only; a well-posed "
                 "minimization would also need convex combinations of the "
                 "two families, which is not searched"),
        "seed": config.seed,
        **report.verdict(),
    })
    print(f"counterexample: min {report.min_value:.6f} at offset "
          f"{report.argmin_offset}, rhs {report.rhs:.6f}, "
          f"margin {report.margin:.6f}")
    return EXIT_OK if report.counterexample_confirmed else EXIT_INVARIANT


def _run_families(config: ExperimentConfig, out: Path) -> int:
    ifs = resolve_system(config.fixture)
    model = discretize(ifs, config.level)
    p = config.p_override if config.p_override is not None else ifs.hausdorff_dim
    r = config.r_grid[0]
    base_spec = base_commutator_spectrum(model, r)

    def stat(scales):
        return ampliation_statistic(base_spec, scales, p)

    report = diagonal_family_check(p, stat, uniform_families(p, config.sizes),
                                   ratio_bound=1.0)
    rows = [(config.fixture, config.level, r, row.size, row.stat,
             row.ratio_to_base, row.bound_low, row.bound_high,
             row.within_low and row.within_high)
            for row in report.rows]
    _write_csv(out / "families.csv",
               ["fixture", "level", "r", "size", "stat", "ratio_to_base",
                "bound_low", "bound_high", "within_bounds"], rows)
    ok = all(row.within_low and row.within_high for row in report.rows)
    _write_json(out / "families_summary.json", {
        "kind": "families", "fixture": config.fixture, "level": config.level,
        "r": r, "p": p, "base_stat": report.base_stat, "seed": config.seed,
        "all_ok": ok,
    })
    print(f"families: {len(rows)} rows -> {out / 'families.csv'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def run(config: ExperimentConfig) -> int:
    """Validate, dispatch, and write artifacts; returns the exit code."""
    diags = validate(config)
    errors = [d for d in diags if d.severity == "error"]
    for d in diags:
        print(f"{d.severity}: {d.message}", file=sys.stderr)
    if errors:
        return EXIT_CONFIG
    if config.kind == "dim":
        return _run_dim(config)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    runners = {
        "words": _run_words,
        "discretize": _run_discretize,
        "estimate": _run_estimate,
        "scaling": _run_scaling,
        "multiplicity": _run_multiplicity,
        "counterexample": _run_counterexample,
        "families": _run_families,
    }
    try:
        return runners[config.kind](config, out)
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BoundChainViolation as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# --------------------------------------------------------------------------
# argument parsing


def _parse_letters(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(x) for x in text.split("."))


def _parse_pieces(text: str):
    pieces = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        prefix, _, mult = chunk.rpartition(":")
        pieces.append((_parse_letters(prefix), int(mult)))
    return tuple(pieces)


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcmlab",
        description="Batch experiments on quasicentral-modulus statistics "
                    "over self-similar joint spectra.")
    sub = parser.add_subparsers(dest="kind", required=True)

    def common(sp, fixture=True, level=False, grid=False, p=False):
        sp.add_argument("--output", default=".", help="output directory")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0,
                        help="recorded in summaries for reproducibility")
        sp.add_argument("--validate-only", action="store_true")
        if fixture:
            sp.add_argument("--fixture", required=True,
                            help=f"one of {FIXTURE_NAMES} or a JSON config path")
        if level:
            sp.add_argument("--level", type=int, required=True)
        if grid:
            sp.add_argument("--r", type=_csv_floats, required=True,
                            metavar="R1,R2,...")
        if p:
            sp.add_argument("--p", type=float, default=None,
                            help="override exponent (default: Hausdorff dimension)")

    sp = sub.add_parser("dim", help="solve the Moran equation")
    sp.add_argument("--ratios", type=_csv_floats, required=True)
    sp.add_argument("--output", default=".")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--validate-only", action="store_true")

    common(sub.add_parser("words", help="stopping set enumeration"), grid=True)
    common(sub.add_parser("discretize", help="model dump"), level=True)
    common(sub.add_parser("estimate", help="statistic and bound chain"),
           level=True, grid=True, p=True)
    sp = sub.add_parser("scaling", help="cylinder pushforward ratios")
    common(sp, level=True, grid=True, p=True)
    sp.add_argument("--word", action="append", required=True, type=_parse_letters,
                    metavar="L1.L2", help="dotted word; repeatable")
    sp = sub.add_parser("multiplicity", help="block multiplicity statistics")
    common(sp, level=True, grid=True, p=True)
    sp.add_argument("--pieces", type=_parse_pieces, required=True,
                    metavar="PFX:K;PFX:K",
                    help="dotted prefix and multiplicity, e.g. '1:2;2:1'")
    sp = sub.add_parser("counterexample", help="pair-sum offset scan")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--window", type=int, default=8)
    sp.add_argument("--output", default=".")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--validate-only", action="store_true")
    sp = sub.add_parser("families", help="ratio-bounded diagonal families")
    common(sp, level=True, grid=True, p=True)
    sp.add_argument("--sizes", type=_csv_ints, required=True,
                    metavar="N1,N2,...")
    return parser


def config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        kind=args.kind,
        fixture=getattr(args, "fixture", None),
        level=getattr(args, "level", None),
        r_grid=getattr(args, "r", ()) or (),
        p_override=getattr(args, "p", None),
        ratios=getattr(args, "ratios", ()) or (),
        words=tuple(getattr(args, "word", ()) or ()),
        pieces=getattr(args, "pieces", ()) or (),
        sizes=getattr(args, "sizes", ()) or (),
        window=getattr(args, "window", 8),
        output=args.output,
        workers=args.workers,
        seed=args.seed,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    config = config_from_args(args)
    if args.validate_only:
        diags = validate(config)
        for d in diags:
            print(f"{d.severity}: {d.message}")
        return EXIT_CONFIG if any(d.severity == "error" for d in diags) else EXIT_OK
    try:
        return run(config)
    except QcmlabError as exc:
        if isinstance(exc, ResourceCapError):
            print(f"resource cap: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
