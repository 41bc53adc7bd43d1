"""Anchor trajectories, multi-power beaconing, and annulus constraint extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .geometry import Point2D
from .radio import RadioConfig, build_range_table, hearing_matrix

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

PATTERNS = ("grid_sweep", "random_waypoint", "explicit")

TRAJECTORY_STREAM = 10
FADING_STREAM = 11


@dataclass(frozen=True)
class TrajectoryConfig:
    pattern: str = "grid_sweep"
    step: float = 15.0
    explicit_points: tuple[Point2D, ...] = ()
    waypoints: int = 10

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown trajectory pattern {self.pattern!r}")
        pts = tuple(p if isinstance(p, Point2D) else Point2D(*p) for p in self.explicit_points)
        object.__setattr__(self, "explicit_points", pts)
        if self.pattern != "explicit" and not self.step > 0:
            raise ValueError("trajectory step must be positive")
        if self.pattern == "explicit" and not pts:
            raise ValueError("explicit trajectory needs at least one point")
        if self.waypoints < 2:
            raise ValueError("random_waypoint needs at least 2 waypoints")


@dataclass(frozen=True)
class AnnulusConstraint:
    """lower < |x - center| <= upper; ``upper`` None means lower-only."""

    center: Point2D
    lower: float = 0.0
    upper: float | None = None
    via_relay: bool = False

    def __post_init__(self):
        if not isinstance(self.center, Point2D):
            object.__setattr__(self, "center", Point2D(*self.center))
        if self.lower < 0:
            raise ValueError("lower radius must be non-negative")
        if self.upper is not None and not self.lower < self.upper:
            raise ValueError(f"empty annulus: lower {self.lower} >= upper {self.upper}")

    def satisfied_by(self, p: Point2D, tol: float = 0.0) -> bool:
        d = float(np.hypot(p.x - self.center.x, p.y - self.center.y))
        if not d > self.lower - tol:
            return False
        return self.upper is None or d <= self.upper + tol


@dataclass(frozen=True)
class RelayTag:
    """A beacon heard second-hand through a relaying sensor."""

    relay_id: int
    level_upper: float
    relay_range: float
    lower: float = 0.0

    def __post_init__(self):
        if not self.relay_range > 0:
            raise ValueError("relay tags need a positive relay range")


@dataclass
class StopRecord:
    """What one sensor heard from one anchor stop."""

    stop_index: int
    position: Point2D
    heard: frozenset[int] = frozenset()
    relay: RelayTag | None = None


@dataclass
class ObservationLog:
    node_id: int
    stops: list[StopRecord] = field(default_factory=list)

    def dump(self) -> str:
        lines = []
        for rec in self.stops:
            levels = ",".join(str(k + 1) for k in sorted(rec.heard)) or "-"
            line = (f"node={self.node_id} stop={rec.stop_index} "
                    f"a=({rec.position.x:.3f},{rec.position.y:.3f}) heard={levels}")
            if rec.relay is not None:
                t = rec.relay
                line += (f" relay={t.relay_id} relay_upper={t.level_upper:g}"
                         f" relay_range={t.relay_range:g} relay_lower={t.lower:g}")
            lines.append(line)
        return "\n".join(lines)


def _axis(length: float, step: float) -> np.ndarray:
    ticks = np.arange(0.0, length + 1e-9 * max(1.0, length), step)
    if length - ticks[-1] > 1e-9 * max(1.0, length):
        ticks = np.append(ticks, length)
    return ticks


def generate_trajectory(
    config: TrajectoryConfig, field_size: tuple[float, float], seed: int = 0
) -> list[Point2D]:
    """Anchor stop positions, in visiting order."""
    width, height = field_size
    if config.pattern == "explicit":
        for p in config.explicit_points:
            if not (0 <= p.x <= width and 0 <= p.y <= height):
                raise ValueError(f"trajectory point {p} lies outside the field")
        return list(config.explicit_points)
    if config.pattern == "grid_sweep":
        xs = _axis(width, config.step)
        ys = _axis(height, config.step)
        stops = []
        for row, y in enumerate(ys):
            cols = xs if row % 2 == 0 else xs[::-1]
            stops.extend(Point2D(float(x), float(y)) for x in cols)
        return stops
    # random_waypoint: straight legs between uniform waypoints, a stop every `step` meters
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, TRAJECTORY_STREAM])
    wps = rng.uniform((0.0, 0.0), (width, height), size=(config.waypoints, 2))
    stops = [Point2D(*map(float, wps[0]))]
    carry = 0.0
    for a, b in zip(wps, wps[1:]):
        leg = float(np.hypot(*(b - a)))
        s = config.step - carry
        while s <= leg:
            p = a + (b - a) * (s / leg)
            stops.append(Point2D(float(p[0]), float(p[1])))
            s += config.step
        carry = leg - (s - config.step)
    return stops


def fading_draws(seed: int, n_stops: int, n_nodes: int) -> np.ndarray:
    """One uniform draw per (stop, sensor) pair."""
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, FADING_STREAM])
    return rng.random((n_stops, n_nodes))


def simulate_beaconing(
    scenario: "ScenarioConfig",
    stops: Sequence[Point2D],
    nodes=None,
) -> dict[int, ObservationLog]:
    """Direct reception of every stop's beacons at every sensor.

    ``nodes`` defaults to the scenario's deployed nodes.
    """
    if not stops:
        raise ValueError("need at least one anchor stop")
    if nodes is None:
        nodes = scenario.deployed_nodes()
    radio = scenario.radio
    xy = np.array([[n.position.x, n.position.y] for n in nodes], dtype=float).reshape(-1, 2)
    draws = fading_draws(scenario.seed, len(stops), len(nodes))
    logs = {n.id: ObservationLog(n.id) for n in nodes}
    for i, stop in enumerate(stops):
        table = build_range_table(scenario.seed, i, radio.doi)
        heard = hearing_matrix(stop, xy, radio.level_ranges, table, scenario.obstacles,
                               draws[i], radio.fading_f)
        for k, node in enumerate(nodes):
            levels = frozenset(int(j) for j in np.flatnonzero(heard[k]))
            logs[node.id].stops.append(StopRecord(i, stop, levels))
    return logs


def valid_radii(heard: frozenset[int] | set[int], level_ranges: Sequence[float]) -> tuple[float, float | None]:
    """(lower, upper) for one stop; upper None if nothing was heard.

    upper is the smallest heard range, lower the largest unheard range below it,
    so lower < upper even when irregularity makes the pattern non-monotone.
    """
    if not heard:
        return level_ranges[-1], None
    k = min(heard)
    upper = level_ranges[k]
    lower = max((level_ranges[j] for j in range(k) if j not in heard), default=0.0)
    return lower, upper


def extract_constraints(log: ObservationLog, radio: RadioConfig) -> list[AnnulusConstraint]:
    out = []
    for rec in log.stops:
        if rec.heard:
            lower, upper = valid_radii(rec.heard, radio.level_ranges)
            out.append(AnnulusConstraint(rec.position, lower, upper))
        elif rec.relay is not None:
            t = rec.relay
            out.append(AnnulusConstraint(rec.position, t.lower, t.level_upper + t.relay_range,
                                         via_relay=True))
        elif radio.lower_only:
            out.append(AnnulusConstraint(rec.position, radio.level_ranges[-1], None))
    return out
