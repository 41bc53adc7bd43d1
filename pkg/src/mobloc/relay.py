"""Boundary-node contention for relaying anchor beacons into obstacle shadows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .beaconing import AnnulusConstraint, ObservationLog, RelayTag, valid_radii
from .geometry import ObstaclePolygon, Point2D, SensorNode, segment_blocked
from .radio import RadioConfig, hearing_matrix, relay_range_table

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

RELAY_FADING_STREAM = 12
RELAY_LOWER_MODES = ("zero", "unheard")


@dataclass(frozen=True)
class ContentionConfig:
    alpha: float = 0.5
    beta: float = 0.5
    max_delay: float = 0.1
    relay_range: float = 15.0
    # d_b for boundary flagging; None means the smallest level range
    boundary_distance: float | None = None
    relay_lower: str = "zero"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not math.isclose(self.alpha + self.beta, 1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(f"alpha + beta must equal 1 (got {self.alpha + self.beta})")
        if not self.max_delay > 0:
            raise ValueError("max_delay must be positive")
        if not self.relay_range > 0:
            raise ValueError("relay_range must be positive")
        if self.boundary_distance is not None and not self.boundary_distance > 0:
            raise ValueError("boundary_distance must be positive")
        if self.relay_lower not in RELAY_LOWER_MODES:
            raise ValueError(f"relay_lower must be one of {RELAY_LOWER_MODES}")


@dataclass(frozen=True)
class RelayEvent:
    anchor_stop_index: int
    winner_node_id: int
    delay: float
    suppressed_node_ids: tuple[int, ...] = ()

    def dump(self) -> str:
        sup = ",".join(map(str, self.suppressed_node_ids)) or "-"
        return (f"relay stop={self.anchor_stop_index} winner={self.winner_node_id} "
                f"delay={self.delay:.6g} suppressed={sup}")


def is_eligible(node: SensorNode) -> bool:
    return bool(node.num_neighbors) and node.initial_energy > 0


def backoff_delay(node: SensorNode, cfg: ContentionConfig) -> float | None:
    """Contention timer; None when the node cannot take part.

    Nodes with no neighbours or no battery are not candidates.
    """
    if not is_eligible(node):
        return None
    used_fraction = node.used_energy / node.initial_energy
    return (cfg.alpha * used_fraction + cfg.beta / node.num_neighbors) * cfg.max_delay


def contention_rounds(
    stop_index: int,
    candidates: Sequence[SensorNode],
    cfg: ContentionConfig,
    obstacles: Sequence[ObstaclePolygon] = (),
) -> list[RelayEvent]:
    """All relay events for one stop, earliest first.

    Each round the pending candidate with the smallest delay (ties: smaller id)
    rebroadcasts, and pending candidates it reaches cancel. Candidates out of its
    reach stay pending for the next round.
    """
    pending = []
    for node in candidates:
        d = backoff_delay(node, cfg)
        if d is not None:
            pending.append((d, node.id, node))
    pending.sort(key=lambda e: (e[0], e[1]))
    events = []
    while pending:
        delay, wid, winner = pending[0]
        rest, suppressed = [], []
        for entry in pending[1:]:
            other = entry[2]
            if (winner.position.dist(other.position) <= cfg.relay_range
                    and not segment_blocked(winner.position, other.position, obstacles)):
                suppressed.append(other.id)
            else:
                rest.append(entry)
        events.append(RelayEvent(stop_index, wid, delay, tuple(sorted(suppressed))))
        pending = rest
    return events


def run_contention(
    stop_index: int,
    candidates: Sequence[SensorNode],
    cfg: ContentionConfig,
    obstacles: Sequence[ObstaclePolygon] = (),
    radio: RadioConfig | None = None,
) -> RelayEvent | None:
    """First relay event for a stop, or None without eligible candidates."""
    events = contention_rounds(stop_index, candidates, cfg, obstacles)
    return events[0] if events else None


def relayed_constraint(
    stop: Point2D, direct_lower: float, level_upper: float, cfg: ContentionConfig
) -> AnnulusConstraint:
    if not level_upper > 0:
        raise ValueError("level_upper must be positive")
    return AnnulusConstraint(stop, direct_lower, level_upper + cfg.relay_range, via_relay=True)


def _relay_lower(cfg: ContentionConfig, radio: RadioConfig, upper: float) -> float:
    if cfg.relay_lower == "zero":
        return 0.0
    # shadowed sensors heard no level directly: largest level range still below the bound
    return max((r for r in radio.level_ranges if r < upper), default=0.0)


def relay_fading_draws(seed: int, stop_index: int, relay_id: int, n_nodes: int) -> np.ndarray:
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, RELAY_FADING_STREAM, stop_index, relay_id])
    return rng.random(n_nodes)


def simulate_relays(
    scenario: "ScenarioConfig",
    stops: Sequence[Point2D],
    nodes: Sequence[SensorNode],
    logs: dict[int, ObservationLog],
) -> list[RelayEvent]:
    """Run contention at every stop and tag relayed receptions into ``logs``.

    Only sensors that heard nothing directly from a stop take a relayed beacon,
    and each keeps at most one (the tightest; earliest on ties). Relays are
    never relayed again.
    """
    cfg, radio = scenario.contention, scenario.radio
    xy = np.array([[n.position.x, n.position.y] for n in nodes], dtype=float).reshape(-1, 2)
    by_id = {n.id: n for n in nodes}
    all_events = []
    for i, stop in enumerate(stops):
        heard_direct = np.array([bool(logs[n.id].stops[i].heard) for n in nodes])
        candidates = [n for n, h in zip(nodes, heard_direct) if h and n.is_boundary]
        events = contention_rounds(i, candidates, cfg, scenario.obstacles)
        all_events.extend(events)
        for ev in events:
            relay = by_id[ev.winner_node_id]
            _, level_upper = valid_radii(logs[relay.id].stops[i].heard, radio.level_ranges)
            table = relay_range_table(scenario.seed, relay.id, radio.doi)
            draws = relay_fading_draws(scenario.seed, i, relay.id, len(nodes))
            reached = hearing_matrix(relay.position, xy, (cfg.relay_range,), table,
                                     scenario.obstacles, draws, radio.fading_f)[:, 0]
            upper = level_upper + cfg.relay_range
            tag = RelayTag(relay.id, level_upper, cfg.relay_range, _relay_lower(cfg, radio, upper))
            for k in np.flatnonzero(reached & ~heard_direct):
                rec = logs[nodes[k].id].stops[i]
                if rec.relay is None or tag.level_upper < rec.relay.level_upper:
                    rec.relay = tag
    return all_events
