"""Command line entry point: ``mobloc``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .beaconing import AnnulusConstraint
from .geometry import Point2D
from .harness import load_experiment, run_sweep, run_trial
from .scenario import ScenarioError, load_scenario
from .solver import NotLocalizable, SolverConfig, estimate_position


def parse_constraints(text: str) -> list[AnnulusConstraint]:
    """One constraint per line: ``cx cy lower upper``; ``-`` as upper means lower-only."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'cx cy lower upper|-', got {line!r}")
        try:
            cx, cy, lower = map(float, parts[:3])
            upper = None if parts[3] == "-" else float(parts[3])
            out.append(AnnulusConstraint(Point2D(cx, cy), lower, upper))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return out


def cmd_validate(args) -> int:
    cfg = load_scenario(args.path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    nodes = cfg.deployed_nodes()
    print(f"ok: {len(nodes)} nodes ({len(cfg.nodes)} explicit), {len(cfg.obstacles)} obstacles, "
          f"field {cfg.field_width:g} x {cfg.field_height:g} m, levels {list(cfg.radio.level_ranges)}")
    return 0


def cmd_solve(args) -> int:
    cons = parse_constraints(Path(args.path).read_text())
    res = estimate_position(cons, SolverConfig(tol=args.tol, max_iter=args.max_iter))
    print(f"x_hat = {res.x_hat.x:.9g} {res.x_hat.y:.9g}")
    print(f"y = {res.y:.9g}")
    print(f"t = {res.t:.9g}")
    print(f"status = {res.status}")
    print(f"kkt_residual = {res.kkt_residual:.3g}")
    print(f"relaxation_tight = {str(res.relaxation_tight).lower()}")
    return 0


def cmd_trial(args) -> int:
    cfg = load_scenario(args.path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    res = run_trial(cfg, relay_on=args.relay == "on", estimator=args.estimator,
                    keep_logs=args.dump_logs)
    if args.dump_logs:
        for node_id in sorted(res.logs):
            text = res.logs[node_id].dump()
            if text:
                print(text)
        for ev in res.relay_events:
            print(ev.dump())
    err = "undefined" if res.error is None else f"{res.error:.6f}"
    print(f"normalized_error = {err}")
    print(f"localized_fraction = {res.localized_fraction:.4f}")
    print(f"mean_constraint_count = {res.mean_constraint_count:.3f}")
    print(f"relay_events = {len(res.relay_events)}")
    print(f"runtime_ms = {1000 * res.runtime_s:.1f}")
    return 0


def cmd_sweep(args) -> int:
    exp = load_experiment(args.path, seed=args.seed)
    stats = run_sweep(exp, out_dir=args.out, workers=args.workers)
    for s in stats:
        p = s.point
        print(f"point {p.index}: doi={p.doi:g} f={p.fading_f:g} relay={'on' if p.relay else 'off'} "
              f"estimator={p.estimator} mean_error={s.mean:.4f} (sd {s.std:.4f}, n={s.trials})")
    print(f"wrote {Path(args.out) / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mobloc", description="Mobile-anchor range-free localization workbench")
    ap.add_argument("--seed", type=int, default=None, help="override the scenario / base seed")
    ap.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    sub = ap.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="scenario file tools")
    scsub = sc.add_subparsers(dest="action", required=True)
    v = scsub.add_parser("validate", help="load and validate a scenario file")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="estimate a position from a constraint list file")
    s.add_argument("path")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=200)
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("trial", help="run one end-to-end trial")
    t.add_argument("path")
    t.add_argument("--relay", choices=("on", "off"), default="on")
    t.add_argument("--estimator", choices=("convex", "baseline"), default="convex")
    t.add_argument("--dump-logs", action="store_true")
    t.set_defaults(func=cmd_trial)

    w = sub.add_parser("sweep", help="run an experiment sweep and write CSVs")
    w.add_argument("path")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, NotLocalizable, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
