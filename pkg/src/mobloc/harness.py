"""End-to-end trials, the normalized error metric, a grid baseline, and sweeps."""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli

from .beaconing import (AnnulusConstraint, ObservationLog, extract_constraints,
                        generate_trajectory, simulate_beaconing)
from .geometry import Point2D, auto_flag_boundary, with_neighbor_counts
from .relay import RelayEvent, simulate_relays
from .scenario import ScenarioConfig, ScenarioParseError, load_scenario, scenario_from_dict
from .solver import SolverConfig, estimate_position

ESTIMATORS = ("convex", "baseline")

SUMMARY_HEADER = ["sweep_point", "doi", "fading_f", "relay", "estimator", "trials", "mean_error",
                  "std_error", "min_error", "max_error", "localized_fraction", "mean_runtime_ms"]
SCATTER_HEADER = ["node_id", "true_x", "true_y", "est_x", "est_y", "status"]
POINTS_HEADER = ["sweep_point", "doi", "fading_f", "relay", "estimator", "step"]


def normalized_error(truths: Sequence[Point2D], estimates: Sequence[Point2D | None], r: float) -> float | None:
    """Mean estimation error over localized nodes, in units of ``r``.

    Entries of ``estimates`` that are None are left out. Returns None when no
    node was localized.
    """
    if len(truths) != len(estimates) or not truths:
        raise ValueError("need equal-length, non-empty position lists")
    if not r > 0:
        raise ValueError("r must be positive")
    errs = [t.dist(e) for t, e in zip(truths, estimates) if e is not None]
    if not errs:
        return None
    return sum(errs) / len(errs) / r


def baseline_estimate(constraints: Sequence[AnnulusConstraint], cell: float = 0.5) -> Point2D:
    """Centroid of the feasible region sampled on a grid.

    When no sample is feasible, the centroid of the samples with the least
    total violation is used instead.
    """
    if not constraints:
        raise ValueError("constraints must not be empty")
    centers = np.array([[c.center.x, c.center.y] for c in constraints], dtype=float)
    lower = np.array([c.lower for c in constraints], dtype=float)
    upper = np.array([np.inf if c.upper is None else c.upper for c in constraints])
    bounded = np.isfinite(upper)
    if bounded.any():
        lo = (centers[bounded] - upper[bounded, None]).max(axis=0)
        hi = (centers[bounded] + upper[bounded, None]).min(axis=0)
        if np.any(hi < lo):
            lo = (centers[bounded] - upper[bounded, None]).min(axis=0)
            hi = (centers[bounded] + upper[bounded, None]).max(axis=0)
    else:
        pad = lower.max() + cell
        lo, hi = centers.min(axis=0) - pad, centers.max(axis=0) + pad
    xs = np.arange(lo[0], hi[0] + 0.5 * cell, cell)
    ys = np.arange(lo[1], hi[1] + 0.5 * cell, cell)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    d = np.hypot(P[:, None, 0] - centers[None, :, 0], P[:, None, 1] - centers[None, :, 1])
    violation = np.maximum(d - upper, 0.0) + np.maximum(lower - d, 0.0)
    feasible = ((d > lower) & (d <= upper)).all(axis=1)
    if feasible.any():
        pick = P[feasible]
    else:
        total = violation.sum(axis=1)
        m = total.min()
        pick = P[total <= m + 1e-9 * max(1.0, m)]
    cx, cy = pick.mean(axis=0)
    return Point2D(float(cx), float(cy))


@dataclass
class NodeResult:
    node_id: int
    truth: Point2D
    estimate: Point2D | None
    status: str
    n_constraints: int


@dataclass
class TrialResult:
    nodes: list[NodeResult]
    error: float | None
    localized_fraction: float
    mean_constraint_count: float
    runtime_s: float
    relay_events: list[RelayEvent] = field(default_factory=list)
    logs: dict[int, ObservationLog] | None = None

    def comparable(self) -> tuple:
        """Everything except wall-clock timing."""
        return (
            [(n.node_id, n.truth, n.estimate, n.status, n.n_constraints) for n in self.nodes],
            self.error, self.localized_fraction, self.mean_constraint_count, self.relay_events,
        )


def prepare_nodes(scenario: ScenarioConfig):
    nodes = with_neighbor_counts(scenario.deployed_nodes(), scenario.radio.level_ranges[0])
    if scenario.obstacles:
        nodes = auto_flag_boundary(nodes, scenario.obstacles, scenario.boundary_distance)
    return nodes


def trial_constraints(scenario: ScenarioConfig, relay_on: bool = True):
    """Nodes, per-node constraint lists, relay events and logs for one scenario."""
    nodes = prepare_nodes(scenario)
    stops = generate_trajectory(scenario.trajectory, (scenario.field_width, scenario.field_height),
                                scenario.seed)
    logs = simulate_beaconing(scenario, stops, nodes)
    events = simulate_relays(scenario, stops, nodes, logs) if relay_on else []
    constraints = {n.id: extract_constraints(logs[n.id], scenario.radio) for n in nodes}
    return nodes, constraints, events, logs


def run_trial(
    scenario: ScenarioConfig,
    relay_on: bool = True,
    estimator: str = "convex",
    solver_config: SolverConfig | None = None,
    keep_logs: bool = False,
) -> TrialResult:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    t0 = time.perf_counter()
    nodes, constraints, events, logs = trial_constraints(scenario, relay_on)
    results = []
    for node in nodes:
        cons = constraints[node.id]
        if not cons:
            results.append(NodeResult(node.id, node.position, None, "not_localizable", 0))
        elif estimator == "convex":
            sol = estimate_position(cons, solver_config)
            results.append(NodeResult(node.id, node.position, sol.x_hat, sol.status, len(cons)))
        else:
            results.append(NodeResult(node.id, node.position, baseline_estimate(cons), "baseline",
                                      len(cons)))
    n = len(results)
    err = normalized_error([r.truth for r in results], [r.estimate for r in results],
                           scenario.radio.r) if n else None
    localized = sum(r.estimate is not None for r in results)
    return TrialResult(
        nodes=results,
        error=err,
        localized_fraction=localized / n if n else 0.0,
        mean_constraint_count=sum(r.n_constraints for r in results) / n if n else 0.0,
        runtime_s=time.perf_counter() - t0,
        relay_events=events,
        logs=logs if keep_logs else None,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    doi: tuple[float, ...] = (0.0,)
    fading_f: tuple[float, ...] = (0.0,)
    relay: tuple[bool, ...] = (True,)
    estimator: tuple[str, ...] = ("convex",)
    step: tuple[float | None, ...] = (None,)
    trials_per_point: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be at least 1")
        for name in ("doi", "fading_f", "relay", "estimator", "step"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"sweep axis {name!r} is empty")
        for e in self.estimator:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}")

    def points(self) -> list["SweepPoint"]:
        combos = itertools.product(self.doi, self.fading_f, self.relay, self.estimator, self.step)
        return [SweepPoint(i, *c) for i, c in enumerate(combos)]


@dataclass(frozen=True)
class SweepPoint:
    index: int
    doi: float
    fading_f: float
    relay: bool
    estimator: str
    step: float | None

    def scenario(self, template: ScenarioConfig, seed: int) -> ScenarioConfig:
        radio = replace(template.radio, doi=self.doi, fading_f=self.fading_f)
        traj = template.trajectory if self.step is None else replace(template.trajectory, step=self.step)
        return replace(template, radio=radio, trajectory=traj, seed=seed)


@dataclass
class SummaryStats:
    point: SweepPoint
    trials: int
    mean: float
    std: float
    min: float
    max: float
    localized_fraction: float
    mean_runtime_ms: float
    errors: list[float | None] = field(default_factory=list)

    def row(self) -> list[str]:
        p = self.point
        return [str(p.index), repr(p.doi), repr(p.fading_f), "on" if p.relay else "off", p.estimator,
                str(self.trials), repr(self.mean), repr(self.std), repr(self.min), repr(self.max),
                repr(self.localized_fraction), f"{self.mean_runtime_ms:.3f}"]


def load_experiment(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomli.loads(path.read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ScenarioParseError(f"cannot load experiment {path}: {exc}") from exc
    scen = data.get("scenario")
    if isinstance(scen, str):
        template = load_scenario(path.parent / scen)
    elif isinstance(scen, dict):
        template = scenario_from_dict(scen)
    else:
        raise ScenarioParseError("experiment needs 'scenario' (file path or inline table)")
    sweep = data.get("sweep", {})
    return ExperimentConfig(
        scenario=template,
        doi=tuple(float(v) for v in sweep.get("doi", [template.radio.doi])),
        fading_f=tuple(float(v) for v in sweep.get("fading_f", [template.radio.fading_f])),
        relay=tuple(bool(v) for v in sweep.get("relay", [True])),
        estimator=tuple(sweep.get("estimator", ["convex"])),
        step=tuple(float(v) for v in sweep.get("step", [template.trajectory.step])),
        trials_per_point=int(data.get("trials_per_point", 1)),
        base_seed=int(data.get("base_seed", 0) if seed is None else seed),
    )


def _run_task(args):
    point, template, seed, solver_config = args
    res = run_trial(point.scenario(template, seed), relay_on=point.relay, estimator=point.estimator,
                    solver_config=solver_config)
    return point.index, seed, res


def _summarize(point: SweepPoint, results: list[TrialResult]) -> SummaryStats:
    errs = [r.error for r in results]
    defined = [e for e in errs if e is not None]
    if defined:
        arr = np.array(defined)
        mean, lo, hi = float(arr.mean()), float(arr.min()), float(arr.max())
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    else:
        mean = std = lo = hi = math.nan
    return SummaryStats(
        point=point,
        trials=len(results),
        mean=mean, std=std, min=lo, max=hi,
        localized_fraction=float(np.mean([r.localized_fraction for r in results])),
        mean_runtime_ms=1000.0 * float(np.mean([r.runtime_s for r in results])),
        errors=errs,
    )


def run_sweep(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    workers: int = 1,
    solver_config: SolverConfig | None = None,
) -> list[SummaryStats]:
    """Run every sweep point over seeds base_seed .. base_seed + trials - 1.

    Seeds are shared across points, so points are paired trial by trial. With
    ``out_dir`` set, writes summary.csv, sweep_points.csv and one
    scatter_<point>.csv per point (nodes of the point's first trial).
    """
    points = config.points()
    tasks = [(p, config.scenario, config.base_seed + k, solver_config)
             for p in points for k in range(config.trials_per_point)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        done = [_run_task(t) for t in tasks]
    done.sort(key=lambda item: (item[0], item[1]))
    by_point: dict[int, list[TrialResult]] = {p.index: [] for p in points}
    for idx, _, res in done:
        by_point[idx].append(res)
    stats = [_summarize(p, by_point[p.index]) for p in points]
    if out_dir is not None:
        write_outputs(stats, by_point, Path(out_dir))
    return stats


def write_outputs(stats: list[SummaryStats], by_point: dict[int, list[TrialResult]], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in stats:
            w.writerow(s.row())
    with open(out / "sweep_points.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINTS_HEADER)
        for s in stats:
            p = s.point
            w.writerow([p.index, repr(p.doi), repr(p.fading_f), "on" if p.relay else "off",
                        p.estimator, "" if p.step is None else repr(p.step)])
    for s in stats:
        first = by_point[s.point.index][0]
        with open(out / f"scatter_{s.point.index}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCATTER_HEADER)
            for n in first.nodes:
                est = ("", "") if n.estimate is None else (repr(n.estimate.x), repr(n.estimate.y))
                w.writerow([n.node_id, repr(n.truth.x), repr(n.truth.y), *est, n.status])
