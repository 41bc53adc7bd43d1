"""Scenario configuration: field, nodes, obstacles, radio, trajectory, contention.

Scenarios are stored as TOML::

    seed = 7

    [field]
    width = 100.0
    height = 100.0
    random_nodes = 100        # extra nodes drawn uniformly from the seed
    initial_energy = 1.0      # joules, for random nodes
    max_used_fraction = 0.5   # random nodes use U[0, this] of their battery

    [radio]
    level_ranges = [15.0, 30.0]
    doi = 0.2
    fading_f = 0.0
    lower_only = false

    [trajectory]
    pattern = "grid_sweep"    # grid_sweep | random_waypoint | explicit
    step = 15.0
    waypoints = 10            # random_waypoint only
    points = [[10.0, 10.0]]   # explicit only

    [contention]
    alpha = 0.5
    beta = 0.5
    max_delay = 0.1           # seconds
    relay_range = 15.0
    boundary_distance = 15.0  # optional, defaults to the smallest level range
    relay_lower = "zero"      # zero | unheard

    [[node]]
    id = 0
    x = 50.0
    y = 50.0
    boundary = false          # optional
    initial_energy = 1.0      # optional
    used_energy = 0.0         # optional
    num_neighbors = 4         # optional, derived from geometry if absent

    [[obstacle]]
    vertices = [[40.0, 40.0], [60.0, 40.0], [60.0, 60.0], [40.0, 60.0]]
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .beaconing import TrajectoryConfig
from .geometry import ObstaclePolygon, Point2D, SensorNode
from .radio import RadioConfig
from .relay import ContentionConfig

DEPLOY_STREAM = 20


class ScenarioError(ValueError):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    field_width: float = 100.0
    field_height: float = 100.0
    nodes: tuple[SensorNode, ...] = ()
    obstacles: tuple[ObstaclePolygon, ...] = ()
    radio: RadioConfig = field(default_factory=RadioConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    contention: ContentionConfig = field(default_factory=ContentionConfig)
    seed: int = 0
    random_nodes: int = 0
    initial_energy: float = 1.0
    max_used_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        validate(self)

    @property
    def boundary_distance(self) -> float:
        d = self.contention.boundary_distance
        return self.radio.level_ranges[0] if d is None else d

    def inside_field(self, p: Point2D) -> bool:
        return 0.0 <= p.x <= self.field_width and 0.0 <= p.y <= self.field_height

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    @cached_property
    def _deployed(self) -> tuple[SensorNode, ...]:
        rng = np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, DEPLOY_STREAM])
        next_id = max((n.id for n in self.nodes), default=-1) + 1
        out = list(self.nodes)
        while len(out) < len(self.nodes) + self.random_nodes:
            px, py = rng.uniform((0.0, 0.0), (self.field_width, self.field_height))
            frac = rng.uniform(0.0, self.max_used_fraction)
            p = Point2D(float(px), float(py))
            # rejection keeps the draw stream deterministic regardless of obstacles hit
            if any(poly.contains(p) or poly.on_boundary(p) for poly in self.obstacles):
                continue
            out.append(SensorNode(next_id, p, initial_energy=self.initial_energy,
                                  used_energy=frac * self.initial_energy))
            next_id += 1
        return tuple(out)

    def deployed_nodes(self) -> tuple[SensorNode, ...]:
        """Explicit nodes followed by the seeded random deployment."""
        return self._deployed


def validate(cfg: ScenarioConfig) -> None:
    if not (cfg.field_width > 0 and cfg.field_height > 0):
        raise ScenarioValidationError("field dimensions must be positive")
    if cfg.random_nodes < 0:
        raise ScenarioValidationError("random_nodes must be non-negative")
    if not (0.0 <= cfg.max_used_fraction <= 1.0):
        raise ScenarioValidationError("max_used_fraction must lie in [0, 1]")
    if cfg.initial_energy < 0:
        raise ScenarioValidationError("initial_energy must be non-negative")
    seen = set()
    for node in cfg.nodes:
        if node.id in seen:
            raise ScenarioValidationError(f"node {node.id}: duplicate id")
        seen.add(node.id)
        if not cfg.inside_field(node.position):
            raise ScenarioValidationError(f"node {node.id}: position {tuple(node.position)} outside the field")
        for k, poly in enumerate(cfg.obstacles):
            if poly.contains(node.position):
                raise ScenarioValidationError(f"node {node.id}: inside obstacle {k}")
    if cfg.trajectory.pattern == "explicit":
        for p in cfg.trajectory.explicit_points:
            if not cfg.inside_field(p):
                raise ScenarioValidationError(f"trajectory point {tuple(p)} outside the field")
    if cfg.random_nodes and cfg.obstacles:
        blocked = sum(abs(p.area) for p in cfg.obstacles)
        if blocked >= cfg.field_width * cfg.field_height:
            raise ScenarioValidationError("obstacles cover the whole field")


def _get(table: dict, key: str, kind, where: str, default=None):
    if key not in table:
        return default
    val = table[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise ScenarioParseError(f"{where}.{key}: expected {kind.__name__}, got {val!r}")
    return val


def _point(raw, where: str) -> Point2D:
    try:
        x, y = raw
        return Point2D(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"{where}: expected [x, y], got {raw!r}") from exc


def scenario_from_dict(data: dict) -> ScenarioConfig:
    known = {"seed", "field", "radio", "trajectory", "contention", "node", "obstacle"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioParseError(f"unknown top-level keys: {sorted(unknown)}")
    fld = data.get("field", {})
    radio = data.get("radio", {})
    traj = data.get("trajectory", {})
    cont = data.get("contention", {})

    try:
        radio_cfg = RadioConfig(
            level_ranges=tuple(float(r) for r in radio.get("level_ranges", (15.0, 30.0))),
            doi=_get(radio, "doi", float, "radio", 0.0),
            fading_f=_get(radio, "fading_f", float, "radio", 0.0),
            lower_only=_get(radio, "lower_only", bool, "radio", False),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(f"radio: {exc}") from exc
    try:
        traj_cfg = TrajectoryConfig(
            pattern=_get(traj, "pattern", str, "trajectory", "grid_sweep"),
            step=_get(traj, "step", float, "trajectory", radio_cfg.level_ranges[0]),
            explicit_points=tuple(_point(p, "trajectory.points") for p in traj.get("points", [])),
            waypoints=_get(traj, "waypoints", int, "trajectory", 10),
        )
    except ScenarioParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(f"trajectory: {exc}") from exc
    try:
        cont_cfg = ContentionConfig(
            alpha=_get(cont, "alpha", float, "contention", 0.5),
            beta=_get(cont, "beta", float, "contention", 0.5),
            max_delay=_get(cont, "max_delay", float, "contention", 0.1),
            relay_range=_get(cont, "relay_range", float, "contention", radio_cfg.level_ranges[0]),
            boundary_distance=_get(cont, "boundary_distance", float, "contention", None),
            relay_lower=_get(cont, "relay_lower", str, "contention", "zero"),
        )
    except ScenarioParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(f"contention: {exc}") from exc

    nodes = []
    for k, raw in enumerate(data.get("node", [])):
        where = f"node[{k}]"
        nid = _get(raw, "id", int, where, k)
        try:
            nodes.append(SensorNode(
                id=nid,
                position=Point2D(_get(raw, "x", float, where), _get(raw, "y", float, where)),
                is_boundary=_get(raw, "boundary", bool, where, False),
                initial_energy=_get(raw, "initial_energy", float, where, 1.0),
                used_energy=_get(raw, "used_energy", float, where, 0.0),
                num_neighbors=_get(raw, "num_neighbors", int, where, None),
            ))
        except ScenarioParseError:
            raise
        except (TypeError, ValueError) as exc:
            raise ScenarioValidationError(f"node {nid}: {exc}") from exc

    obstacles = []
    for k, raw in enumerate(data.get("obstacle", [])):
        verts = [_point(v, f"obstacle[{k}].vertices") for v in raw.get("vertices", [])]
        try:
            obstacles.append(ObstaclePolygon(tuple(verts)))
        except ValueError as exc:
            raise ScenarioValidationError(f"obstacle {k}: {exc}") from exc

    try:
        return ScenarioConfig(
            field_width=_get(fld, "width", float, "field", 100.0),
            field_height=_get(fld, "height", float, "field", 100.0),
            nodes=tuple(nodes),
            obstacles=tuple(obstacles),
            radio=radio_cfg,
            trajectory=traj_cfg,
            contention=cont_cfg,
            seed=_get(data, "seed", int, "", 0),
            random_nodes=_get(fld, "random_nodes", int, "field", 0),
            initial_energy=_get(fld, "initial_energy", float, "field", 1.0),
            max_used_fraction=_get(fld, "max_used_fraction", float, "field", 0.5),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(str(exc)) from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    c = cfg.contention
    cont = {"alpha": c.alpha, "beta": c.beta, "max_delay": c.max_delay,
            "relay_range": c.relay_range, "relay_lower": c.relay_lower}
    if c.boundary_distance is not None:
        cont["boundary_distance"] = c.boundary_distance
    traj = {"pattern": cfg.trajectory.pattern, "step": cfg.trajectory.step,
            "waypoints": cfg.trajectory.waypoints}
    if cfg.trajectory.explicit_points:
        traj["points"] = [[p.x, p.y] for p in cfg.trajectory.explicit_points]
    out = {
        "seed": cfg.seed,
        "field": {"width": cfg.field_width, "height": cfg.field_height,
                  "random_nodes": cfg.random_nodes, "initial_energy": cfg.initial_energy,
                  "max_used_fraction": cfg.max_used_fraction},
        "radio": {"level_ranges": list(cfg.radio.level_ranges), "doi": cfg.radio.doi,
                  "fading_f": cfg.radio.fading_f, "lower_only": cfg.radio.lower_only},
        "trajectory": traj,
        "contention": cont,
    }
    nodes = []
    for n in cfg.nodes:
        entry = {"id": n.id, "x": n.position.x, "y": n.position.y, "boundary": n.is_boundary,
                 "initial_energy": n.initial_energy, "used_energy": n.used_energy}
        if n.num_neighbors is not None:
            entry["num_neighbors"] = n.num_neighbors
        nodes.append(entry)
    if nodes:
        out["node"] = nodes
    if cfg.obstacles:
        out["obstacle"] = [{"vertices": [[v.x, v.y] for v in p.vertices]} for p in cfg.obstacles]
    return out


def loads_scenario(text: str) -> ScenarioConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioParseError(f"malformed scenario file: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    return loads_scenario(text)


def dumps_scenario(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(scenario_to_dict(cfg))


def write_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(cfg))


def default_setup(seed: int = 0, doi: float = 0.0, fading_f: float = 0.0,
                  obstacle: bool = False) -> ScenarioConfig:
    """100 random nodes in a 100 m square, ranges r = 15 m and 2r, grid trajectory of step r.

    ``obstacle`` adds one 20 m square in the middle of the field.
    """
    obstacles = (ObstaclePolygon.rectangle(40.0, 40.0, 60.0, 60.0),) if obstacle else ()
    return ScenarioConfig(
        field_width=100.0,
        field_height=100.0,
        obstacles=obstacles,
        radio=RadioConfig((15.0, 30.0), doi=doi, fading_f=fading_f),
        trajectory=TrajectoryConfig("grid_sweep", 15.0),
        contention=ContentionConfig(relay_range=15.0),
        seed=seed,
        random_nodes=100,
    )
