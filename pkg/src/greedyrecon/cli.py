"""Command-line driver: experiment orchestration, persistence, reproduction.

Subcommands (one per experiment family):

    greedy           design controls, persist them with the basis order
    identify         synthesize data with the configured truth and fit
                     coefficients; writes error-field and Taylor outputs
    baseline         random constant controls + identification
    landscape        2-D objective scan over a coefficient pair
    taylor           Taylor-gap table from a stored identification
    stability-probe  empirical perturbation-response ratios
    all              greedy -> identify -> landscape -> taylor

Artifacts are directories of JSON summaries and CSV matrices; CSV floats
carry 17 significant digits so reruns with equal seeds are byte-identical.
Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial
(non-converged) result.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, ExperimentConfig, build_context, greedy_config, truth_nonlinearity
from .exceptions import GreedyFailure, NumericalError
from .greedy import run_greedy
from .grid import Grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def write_matrix_csv(path: Path, corner: str, col_coords, row_coords, matrix) -> None:
    """Matrix with axis headers: first row = column coordinates, first
    column = row coordinates; NaN entries spelled 'nan'."""
    with open(path, "w") as fh:
        fh.write(corner + "," + ",".join(_fmt(c) for c in col_coords) + "\n")
        for r, row in zip(row_coords, matrix):
            fh.write(_fmt(r) + "," + ",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def controls_to_rows(controls):
    for m, field in enumerate(controls):
        for comp in range(2):
            arr = field[comp]
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    yield (m, comp, i, j, float(arr[i, j]))


def write_controls(path: Path, controls) -> None:
    write_csv(path, ["control", "component", "i", "j", "value"],
              controls_to_rows(controls))


def read_controls(path: Path, grid: Grid) -> list[np.ndarray]:
    lines = path.read_text().strip().split("\n")[1:]
    by_index: dict[int, np.ndarray] = {}
    for line in lines:
        m, comp, i, j, value = line.split(",")
        field = by_index.setdefault(int(m), np.zeros((2,) + grid.shape))
        field[int(comp), int(i), int(j)] = float(value)
    return [by_index[m] for m in sorted(by_index)]


def _load_artifact(out: Path):
    cfg = ExperimentConfig.load(out / "config.json")
    ctx = build_context(cfg)
    basis_doc = json.loads((out / "basis.json").read_text())
    if basis_doc["degree"] != cfg.degree:
        raise ConfigError("artifact basis degree disagrees with config")
    ctx.basis.order = np.asarray(basis_doc["order"], dtype=int)
    controls = read_controls(out / "controls.csv", ctx.grid)
    return cfg, ctx, controls, basis_doc


def _write_summary(out: Path, updates: dict) -> None:
    path = out / "summary.json"
    payload = json.loads(path.read_text()) if path.exists() else {}
    payload.update(updates)
    write_json(path, payload)


def cmd_greedy(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    ctx = build_context(cfg)
    gcfg = greedy_config(cfg)
    t0 = time.perf_counter()
    try:
        run = run_greedy(ctx, gcfg)
    except GreedyFailure as exc:
        run = exc.partial
        if run is not None and run.controls:
            write_controls(out / "controls.csv", run.controls)
        write_json(out / "greedy.json", {
            "failed": True, "message": str(exc),
            "k_final": 0 if run is None else run.k_final,
        })
        print(f"greedy failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    elapsed = time.perf_counter() - t0
    write_controls(out / "controls.csv", run.controls)
    write_json(out / "basis.json", {
        "degree": cfg.degree,
        "exponents": [list(e) for e in run.basis.exponents],
        "order": [int(j) for j in run.basis.order],
        "swaps": [list(s) for s in run.swaps],
        "winners": [int(w) for w in run.winners],
    })
    write_json(out / "greedy.json", {
        "failed": False,
        "k_final": run.k_final,
        "stopped_by": run.stopped_by,
        "f_max_history": run.f_max_history,
        "progress": [
            {"stage": rec["stage"], "k": rec["k"], "winner": int(rec["winner"]),
             "f_max": rec["f_max"],
             "scores": {str(c): s for c, s in rec["scores"].items()}}
            for rec in run.progress
        ],
    })
    _write_summary(out, {"tool_version": _version(),
                         "greedy": {"k_final": run.k_final,
                                    "stopped_by": run.stopped_by,
                                    "seconds": elapsed}})
    print(f"greedy: {run.k_final} controls ({run.stopped_by}) in {elapsed:.1f}s -> {out}")
    return EXIT_OK


def cmd_identify(out: Path, truth_override: str | None = None) -> int:
    cfg, ctx, controls, basis_doc = _load_artifact(out)
    kind = truth_override or cfg.truth
    truth = truth_nonlinearity(cfg, kind)
    t0 = time.perf_counter()
    data = analysis.generate_data(truth, controls, ctx)
    k_restrict = len(controls) if len(controls) < ctx.basis.size else None
    alpha, value, res = analysis.identify(
        controls, data, ctx, cfg.optim_coeff, cfg.alpha_max,
        seed=cfg.seed, k=k_restrict)
    elapsed = time.perf_counter() - t0

    exps = ctx.basis.ordered_exponents()
    write_csv(out / "identified.csv", ["position", "i1", "i2", "coefficient"],
              [(p, e[0], e[1], float(alpha[p])) for p, e in enumerate(exps)])

    states = [ctx.solve(ctx.combo(alpha), eps) for eps in controls]
    sets, square = analysis.solution_sets(states)
    coll = [analysis.collinearity(s.points) for s in sets]
    coll_union = analysis.collinearity(np.concatenate([s.points for s in sets]))
    efield = analysis.error_field(truth, alpha, ctx.basis, square,
                                  m=cfg.error_lattice_m)
    write_matrix_csv(out / "error_field.csv", "y2\\y1", efield.y1, efield.y2,
                     efield.samples.T)
    onset = max(
        float(np.max(np.abs(analysis.error_values(truth, alpha, ctx.basis,
                                                   s.points[:, 0], s.points[:, 1]))))
        for s in sets
    )
    offset = float(np.max(np.abs(efield.samples)))

    table = analysis.taylor_error_table(kind, alpha, ctx.basis)
    write_csv(out / "taylor.csv",
              ["i1", "i2", "truth_coeff", "identified_coeff", "abs_error"],
              [(i1, i2, t, a, err) for (i1, i2), (t, a, err) in sorted(table.items())])

    write_json(out / "identify.json", {
        "truth": kind,
        "objective_value": value,
        "iterations": res.iterations,
        "converged": bool(res.converged),
        "seconds": elapsed,
        "square_center": list(square[0]),
        "square_side": square[1],
        "collinearity_per_control": coll,
        "collinearity_union": coll_union,
        "max_error_on_sets": onset,
        "max_error_on_square": offset,
    })
    _write_summary(out, {"identify": {"truth": kind, "objective_value": value,
                                      "max_collinearity": max(coll),
                                      "collinearity_union": coll_union,
                                      "seconds": elapsed}})
    print(f"identify[{kind}]: objective {value:.3e} in {elapsed:.1f}s -> {out}")
    return EXIT_OK


def cmd_baseline(cfg: ExperimentConfig, out: Path, count: int,
                 mode: str = "diagonal") -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    ctx = build_context(cfg)
    box = greedy_config(cfg).box
    try:
        controls = analysis.random_constant_controls(count, box, ctx.grid,
                                                     seed=cfg.seed, mode=mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_controls(out / "controls.csv", controls)
    write_json(out / "basis.json", {
        "degree": cfg.degree,
        "exponents": [list(e) for e in ctx.basis.exponents],
        "order": [int(j) for j in ctx.basis.order],
        "swaps": [],
        "winners": [],
    })
    _write_summary(out, {"tool_version": _version(),
                         "baseline": {"count": count, "seed": cfg.seed,
                                      "mode": mode}})
    return cmd_identify(out)


def _resolve_pair(ctx, pair: str) -> tuple[int, int]:
    if pair == "auto":
        # the quadratic pair: coefficients multiplying y1^2 and y1*y2
        try:
            return ctx.basis.position_of((2, 0)), ctx.basis.position_of((1, 1))
        except ValueError as exc:
            raise ConfigError("automatic pair needs polynomial degree >= 2") from exc
    try:
        i, j = (int(p) for p in pair.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --pair {pair!r}: expected 'auto' or 'i,j'") from exc
    if not (0 <= i < ctx.basis.size and 0 <= j < ctx.basis.size and i != j):
        raise ConfigError(f"pair positions out of range: {i},{j}")
    return i, j


def cmd_landscape(out: Path, pair: str, points: int, lo: float, hi: float,
                  truth_override: str | None = None) -> int:
    cfg, ctx, controls, _ = _load_artifact(out)
    kind = truth_override or cfg.truth
    truth = truth_nonlinearity(cfg, kind)
    data = analysis.generate_data(truth, controls, ctx)
    idx = _resolve_pair(ctx, pair)
    ident_path = out / "identified.csv"
    if ident_path.exists():
        rows = ident_path.read_text().strip().split("\n")[1:]
        alpha_base = np.array([float(r.split(",")[3]) for r in rows])
    else:
        alpha_base = np.zeros(ctx.basis.size)
    lattice = np.linspace(lo, hi, points)
    scan = analysis.landscape_scan(controls, data, ctx, alpha_base, idx,
                                   lattice, lattice)
    write_matrix_csv(out / "landscape.csv", "c1\\c2", scan.coeff2, scan.coeff1,
                     scan.values)
    _write_summary(out, {"landscape": {"index_pair": list(idx),
                                       "points": points, "lo": lo, "hi": hi}})
    print(f"landscape over positions {idx} -> {out / 'landscape.csv'}")
    return EXIT_OK


def cmd_taylor(out: Path) -> int:
    cfg, ctx, _, _ = _load_artifact(out)
    ident_path = out / "identified.csv"
    if not ident_path.exists():
        raise ConfigError("artifact has no identified coefficients; run identify")
    rows = ident_path.read_text().strip().split("\n")[1:]
    alpha = np.array([float(r.split(",")[3]) for r in rows])
    table = analysis.taylor_error_table(cfg.truth, alpha, ctx.basis)
    write_csv(out / "taylor.csv",
              ["i1", "i2", "truth_coeff", "identified_coeff", "abs_error"],
              [(i1, i2, t, a, err) for (i1, i2), (t, a, err) in sorted(table.items())])
    return EXIT_OK


def cmd_stability(cfg: ExperimentConfig, out: Path, k: int, samples: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    ctx = build_context(cfg)
    # probe at the box midpoint, or half the upper bound if that is zero
    mid = 0.5 * (np.asarray(cfg.eps_a) + np.asarray(cfg.eps_b))
    if np.all(mid == 0.0):
        mid = 0.5 * np.asarray(cfg.eps_b)
    control = np.zeros((2,) + ctx.grid.shape)
    control[0, 1:-1, 1:-1] = mid[0]
    control[1, 1:-1, 1:-1] = mid[1]
    stats = analysis.stability_probe(ctx, k, samples, cfg.seed, control,
                                     alpha_max=cfg.alpha_max)
    payload = {
        "k": k,
        "samples_used": stats.samples_used,
        "h1_per_dalpha": {"max": stats.h1_per_dalpha[0],
                          "median": stats.h1_per_dalpha[1]},
        "y_per_dalpha": {"max": stats.y_per_dalpha[0],
                         "median": stats.y_per_dalpha[1]},
        "dalpha_per_y": {"max": stats.dalpha_per_y[0],
                         "median": stats.dalpha_per_y[1]},
    }
    write_json(out / "stability.json", payload)
    _write_summary(out, {"stability": payload})
    print(f"stability probe k={k}: H1 ratio max {stats.h1_per_dalpha[0]:.3e}")
    return EXIT_OK


def cmd_all(cfg: ExperimentConfig, out: Path) -> int:
    code = cmd_greedy(cfg, out)
    if code != EXIT_OK:
        return code
    code = cmd_identify(out)
    if code != EXIT_OK:
        return code
    code = cmd_landscape(out, "auto", 21, 0.0, cfg.alpha_max)
    if code != EXIT_OK:
        return code
    return cmd_taylor(out)


def _version() -> str:
    from . import __version__

    return __version__


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.output_dir = args.out
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyrecon",
        description="design optimal inputs and identify an unknown coupling "
                    "nonlinearity in a two-component elliptic system",
    )
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--threads", type=int, help="bound on candidate parallelism")
    parser.add_argument("--out", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("greedy")
    p = sub.add_parser("identify")
    p.add_argument("--truth", choices=["bilinear", "sinusoidal", "exponential"])
    p = sub.add_parser("baseline")
    p.add_argument("--count", type=int, default=19)
    p.add_argument("--mode", choices=["diagonal", "independent"],
                   default="diagonal")
    p = sub.add_parser("landscape")
    p.add_argument("--pair", default="auto",
                   help="'auto' or two comma-separated basis positions")
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--truth", choices=["bilinear", "sinusoidal", "exponential"])
    sub.add_parser("taylor")
    p = sub.add_parser("stability-probe")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--samples", type=int, default=50)
    sub.add_parser("all")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        out = Path(cfg.output_dir)
        if args.command == "greedy":
            return cmd_greedy(cfg, out)
        if args.command == "identify":
            return cmd_identify(out, truth_override=args.truth)
        if args.command == "baseline":
            return cmd_baseline(cfg, out, args.count, mode=args.mode)
        if args.command == "landscape":
            hi = args.hi if args.hi is not None else cfg.alpha_max
            return cmd_landscape(out, args.pair, args.points, args.lo, hi,
                                 truth_override=args.truth)
        if args.command == "taylor":
            return cmd_taylor(out)
        if args.command == "stability-probe":
            return cmd_stability(cfg, out, args.k, args.samples)
        if args.command == "all":
            return cmd_all(cfg, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
