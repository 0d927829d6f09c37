"""Command line front end.

Three subcommands:

- ``field``:  sample an operator field (S, T, or heat snapshots) on the suite
  grid and write it as CSV plus a JSON sidecar;
- ``cover``:  run the admissible covering for a finite F and write the result
  JSON (optionally an SVG drawing for n <= 2);
- ``verify``: run the inequality suite, writing bundle.json, per-check CSV
  tables, and (with --svg) figures.

Exit codes: 0 success, 1 at least one non-vacuous check failed, 2 usage or
configuration error.  All outputs land under --out; floats in CSV files carry
17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import covering as cov
from . import verify as ver
from .operators import Grid, GridField, OperatorParams, maximal_T_field, square_S_field
from .semigroup import ou_field_grid, ou_grad_field_grid


class CliError(Exception):
    """Usage/config errors: mapped to exit code 2."""


@dataclass
class RunConfig:
    """Resolved run parameters shared by the subcommands."""

    cfg: dict
    out: Path
    svg: bool
    refine: int

    @property
    def dim(self) -> int:
        return self.cfg["dim"]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gausscone", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config path (defaults per --dim)")
    common.add_argument("--seed", type=int, default=None, help="override the suite seed")
    common.add_argument("--dim", type=int, default=None, help="dimension (1-3) when no config is given")
    common.add_argument("--refine", type=int, default=1, help="resolution refinement level (>= 1)")
    common.add_argument("--out", type=str, default="out", help="output directory")
    common.add_argument("--svg", action="store_true", help="also render SVG figures")
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("field", parents=[common], help="sample an operator field to CSV")
    pf.add_argument("--operator", choices=["S", "T", "heat"], required=True)
    pf.add_argument("--u", required=True, help="corpus entry id")
    pf.add_argument("--A", type=float, default=1.0, help="aperture for T")
    pf.add_argument("--a", type=float, default=1.0, help="admissibility scale")

    pc = sub.add_parser("cover", parents=[common], help="run the admissible covering")
    pc.add_argument("--F", required=True, help="finite point set as JSON (e.g. '[[0.0]]') or @file")
    pc.add_argument("--a", type=float, default=1.0)
    pc.add_argument("--b", type=float, default=1.0)
    pc.add_argument("--c", type=float, default=1.0)

    pv = sub.add_parser("verify", parents=[common], help="run the verification suite")
    pv.add_argument("--check", type=str, default=None, help="comma-separated subset of checks to run")
    return p


def _resolve_config(args) -> RunConfig:
    if args.config is not None:
        try:
            cfg = ver.load_config(args.config)
        except FileNotFoundError as e:
            raise CliError(f"config not found: {e.filename}")
        except (json.JSONDecodeError, ver.VerifyError) as e:
            raise CliError(f"bad config: {e}")
        if args.dim is not None and args.dim != cfg["dim"]:
            raise CliError(f"--dim {args.dim} conflicts with config dim {cfg['dim']}")
    else:
        try:
            cfg = ver.default_config(args.dim if args.dim is not None else 1)
        except ver.VerifyError as e:
            raise CliError(str(e))
    if args.seed is not None:
        cfg["seed"] = int(args.seed)
    if args.refine < 1:
        raise CliError("--refine must be >= 1")
    cfg["refine"] = 1  # grid refinement is handled per command
    return RunConfig(cfg=cfg, out=Path(args.out), svg=bool(args.svg), refine=int(args.refine))


def _write_sidecar(path: Path, payload: dict) -> None:
    path.write_text(json.dumps({"schema": 1, **payload}, sort_keys=True, indent=2) + "\n")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_field_csv(path: Path, fld: GridField, grads: np.ndarray | None = None, times=None) -> None:
    grid = fld.grid
    nodes = grid.nodes()
    coord_names = ["x", "y", "z"][: grid.n]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if times is None:
            w.writerow(coord_names + ["value"])
            for pt, val in zip(nodes, fld.values.ravel()):
                w.writerow([_fmt(c) for c in pt] + [_fmt(val)])
        else:
            grad_names = [f"grad_{c}" for c in coord_names]
            w.writerow(coord_names + ["t", "value"] + grad_names)
            for ti, t in enumerate(times):
                vals = fld.values[ti].ravel()
                gr = grads[ti].reshape(-1, grid.n)
                for pt, val, g in zip(nodes, vals, gr):
                    w.writerow([_fmt(c) for c in pt] + [_fmt(t), _fmt(val)] + [_fmt(gc) for gc in g])


def cmd_field(run: RunConfig, operator: str, u_id: str, A: float, a: float) -> int:
    cfg = run.cfg
    corpus = ver.build_corpus(cfg)
    if u_id not in corpus:
        raise CliError(f"unknown corpus entry {u_id!r}")
    u = corpus[u_id]
    grid = Grid(cfg["dim"], cfg["box_halfwidth"], cfg["grid_h"])
    n_t = (1 << (run.refine + 3)) + 1  # nested cone grids across refinement levels
    run.out.mkdir(parents=True, exist_ok=True)
    stem = run.out / f"field_{operator}_{u_id}"
    meta = {"operator": operator, "u": u_id, "A": A, "a": a, "h": grid.h, "n_t": n_t, "seed": cfg["seed"], "refine": run.refine}
    if operator == "S":
        fld = square_S_field(u, a, 0.0, grid, n_t=n_t)
        _write_field_csv(stem.with_suffix(".csv"), fld)
    elif operator == "T":
        fld = maximal_T_field(u, OperatorParams(A, a), grid, n_t=n_t)
        _write_field_csv(stem.with_suffix(".csv"), fld)
    else:
        times = np.geomspace(grid.h, 1.0, 8)
        vals = np.stack([ou_field_grid(u, t * t, grid.axes) for t in times])
        grads = np.stack([ou_grad_field_grid(u, t * t, grid.axes) for t in times])
        fld = GridField(grid, vals, times=times, meta=meta)
        _write_field_csv(stem.with_suffix(".csv"), fld, grads=grads, times=times)
    _write_sidecar(stem.with_suffix(".json"), meta)
    if run.svg and operator in ("S", "T") and grid.n <= 2:
        from . import figures

        figures.save_field_figure(fld, stem, label=f"{operator} {u_id}")
    return 0


def _parse_F(spec: str) -> list:
    text = spec
    if spec.startswith("@"):
        try:
            text = Path(spec[1:]).read_text()
        except OSError as e:
            raise CliError(f"cannot read F file: {e}")
    try:
        F = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"F must be JSON: {e}")
    if not isinstance(F, list) or not F:
        raise CliError("F must be non-empty")
    return F


def cmd_cover(run: RunConfig, F_spec: str, a: float, b: float, c: float) -> int:
    F = _parse_F(F_spec)
    if min(a, b, c) <= 0:
        raise CliError("a, b, c must be positive")
    controls = cov.CoveringControls(seed=run.cfg["seed"], refine=run.refine)
    try:
        result = cov.cover_admissible(F, a, b, c, controls)
    except cov.CoveringError as e:
        raise CliError(str(e))
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / "cover.json").write_text(json.dumps(result.to_json(), sort_keys=True, indent=2) + "\n")
    if run.svg:
        cubes, _ = cov.whitney_decompose(F, a, min(0.5, b), controls)
        from . import figures

        figures.save_covering_figure(result, cubes, run.out / "cover")
    return 0


def cmd_verify(run: RunConfig, checks: str | None) -> int:
    cfg = run.cfg
    if checks is not None:
        names = [s.strip() for s in checks.split(",") if s.strip()]
        unknown = [s for s in names if s not in cfg["enabled"] and s not in ver._CHECKS]
        if unknown:
            raise CliError(f"unknown checks: {unknown}")
        cfg["enabled"] = names
    if run.refine > 1:
        cfg["grid_h"] = cfg["grid_h"] / run.refine
    reports = ver.run_suite(cfg, out_dir=run.out, figures=run.svg)
    failed = [r.check_id for r in reports if not r.vacuous and not r.passed]
    for r in reports:
        status = "VACUOUS" if r.vacuous else ("PASS" if r.passed else "FAIL")
        print(f"{r.check_id:12s} {status:7s} constant={r.estimated_constant:.6g} ({r.runtime:.1f}s)")
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        run = _resolve_config(args)
        if args.command == "field":
            return cmd_field(run, args.operator, args.u, args.A, args.a)
        if args.command == "cover":
            return cmd_cover(run, args.F, args.a, args.b, args.c)
        return cmd_verify(run, args.check)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ver.VerifyError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
