"""Beacon reception under radio irregularity (DOI), obstacles and fading."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import ObstaclePolygon, Point2D, segment_blocked

# stream tags for seeded generators; keep stable, results depend on them
DOI_ANCHOR_STREAM = 1
DOI_RELAY_STREAM = 2


@dataclass(frozen=True)
class RadioConfig:
    level_ranges: tuple[float, ...] = (15.0, 30.0)
    doi: float = 0.0
    fading_f: float = 0.0
    # emit lower-only constraints for stops heard at no level
    lower_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "level_ranges", tuple(float(r) for r in self.level_ranges))
        lr = self.level_ranges
        if not lr:
            raise ValueError("level_ranges must not be empty")
        if lr[0] <= 0 or any(b <= a for a, b in zip(lr, lr[1:])):
            raise ValueError("level_ranges must be positive and strictly increasing")
        if not (0.0 <= self.doi < 1.0):
            raise ValueError("doi must lie in [0, 1)")
        if not (0.0 <= self.fading_f < 1.0):
            raise ValueError("fading_f must lie in [0, 1)")

    @property
    def r(self) -> float:
        """Smallest nominal range, used to normalize errors."""
        return self.level_ranges[0]


@dataclass(frozen=True)
class IrregularRangeTable:
    """Per-degree range multipliers around a transmitter."""

    bins: np.ndarray = field(repr=False)
    doi: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=float)
        if b.shape != (360,):
            raise ValueError("range table needs exactly 360 bins")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    def __eq__(self, other):
        if not isinstance(other, IrregularRangeTable):
            return NotImplemented
        return self.doi == other.doi and np.array_equal(self.bins, other.bins)

    def __hash__(self):
        return hash((self.doi, self.bins.tobytes()))

    @classmethod
    def isotropic(cls) -> "IrregularRangeTable":
        return cls(np.ones(360), 0.0)

    def bearing_bin(self, tx: Point2D, rx: Point2D) -> int:
        deg = math.degrees(math.atan2(rx.y - tx.y, rx.x - tx.x)) % 360.0
        return int(deg) % 360

    def multiplier(self, tx: Point2D, rx: Point2D) -> float:
        return float(self.bins[self.bearing_bin(tx, rx)])

    def multipliers(self, tx: Point2D, rx_xy: np.ndarray) -> np.ndarray:
        """Vectorized lookup for an (n, 2) array of receiver positions."""
        deg = np.degrees(np.arctan2(rx_xy[:, 1] - tx.y, rx_xy[:, 0] - tx.x)) % 360.0
        return self.bins[deg.astype(int) % 360]


def _range_table(seed: int, key: Sequence[int], doi: float) -> IrregularRangeTable:
    if doi == 0.0:
        return IrregularRangeTable.isotropic()
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, *key])
    # closed random walk: zero-sum steps bounded by doi/10, so the wrap 359 -> 0 is
    # as smooth as every other neighbour pair
    steps = rng.uniform(-1.0, 1.0, 360)
    steps -= steps.mean()
    steps /= max(1.0, np.abs(steps).max())
    walk = np.concatenate(([0.0], np.cumsum(steps[:-1]))) * (doi / 10.0)
    walk += 1.0 - 0.5 * (walk.max() + walk.min()) + rng.uniform(-0.5, 0.5) * doi
    # clipping is 1-Lipschitz, so the neighbour bound survives
    bins = np.clip(walk, 1.0 - doi, 1.0 + doi)
    return IrregularRangeTable(bins, doi)


def build_range_table(seed: int, anchor_stop_index: int, doi: float) -> IrregularRangeTable:
    """Deterministic DOI table for one anchor stop."""
    if not (0.0 <= doi < 1.0):
        raise ValueError("doi must lie in [0, 1)")
    return _range_table(seed, (DOI_ANCHOR_STREAM, anchor_stop_index), doi)


def relay_range_table(seed: int, node_id: int, doi: float) -> IrregularRangeTable:
    """DOI table for a relaying sensor, keyed by its node id."""
    if not (0.0 <= doi < 1.0):
        raise ValueError("doi must lie in [0, 1)")
    return _range_table(seed, (DOI_RELAY_STREAM, node_id), doi)


def can_hear(
    tx: Point2D,
    rx: Point2D,
    nominal_range: float,
    table: IrregularRangeTable,
    obstacles: Sequence[ObstaclePolygon],
    fading_draw: float,
    fading_f: float = 0.0,
) -> bool:
    if nominal_range <= 0:
        raise ValueError("nominal_range must be positive")
    if fading_draw < fading_f:
        return False
    d = float(np.hypot(rx.x - tx.x, rx.y - tx.y))
    if d > nominal_range * table.multiplier(tx, rx):
        return False
    return not segment_blocked(tx, rx, obstacles)


def hearing_matrix(
    tx: Point2D,
    rx_xy: np.ndarray,
    level_ranges: Sequence[float],
    table: IrregularRangeTable,
    obstacles: Sequence[ObstaclePolygon],
    fading_draws: np.ndarray,
    fading_f: float,
) -> np.ndarray:
    """(n_receivers, n_levels) boolean array, element-wise equal to ``can_hear``."""
    d = np.hypot(rx_xy[:, 0] - tx.x, rx_xy[:, 1] - tx.y)
    reach = table.multipliers(tx, rx_xy)
    heard = d[:, None] <= np.asarray(level_ranges)[None, :] * reach[:, None]
    heard &= (fading_draws >= fading_f)[:, None]
    if obstacles:
        for k in np.flatnonzero(heard.any(axis=1)):
            if segment_blocked(tx, Point2D(*rx_xy[k]), obstacles):
                heard[k] = False
    return heard
