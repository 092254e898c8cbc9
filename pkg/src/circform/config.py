"""Scenario files: YAML schema, defaults, overrides, validation and hashing.

Angles are degrees in the file (keys ending in ``_deg``) and radians in
memory. A scenario is resolved in three passes: defaults are merged under
the file, ``--set key=value`` overrides are applied on dotted paths, then
the result is validated and hashed. The resolved mapping is what gets
written next to a run's traces, so re-running it reproduces the run.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import yaml

from .formation import FormationSpec, GainConditionError, validate_gains
from .graph import FormationGraph, GraphError, is_connected
from .guidance import GuidanceGains
from .network import NetworkModel
from .paths import Circle, ImplicitPath, make_path

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PHASE_CONVENTION = "travel"
BUNDLED = ("paper-flight", "two-agent-minimal", "ellipse-demo", "blackout-stress")

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "name": "unnamed",
    "geometry": {"kind": "circle", "center": [0.0, 0.0], "radius": 80.0, "semi_axes": None,
                 "phase_convention": PHASE_CONVENTION},
    "graph": {"vertices": None, "edges": []},
    "formation": {"z_star_deg": None, "k_r": 0.0},
    "guidance": {"k_e": 1.0, "k_d": 1.0, "bank_limit_deg": 45.0, "gravity": 9.80665},
    "agents": [],
    "network": {"period": 0.5, "loss": 0.0, "delay": 0.0, "blackouts": [], "position_noise": 0.0},
    "run": {"start_time": 0.0, "duration": 60.0, "dt": 0.02, "seed": 0},
    "wind": [0.0, 0.0],
    "analysis": {"band_deg": 10.0, "dwell": 60.0, "transient": 20.0, "linearity_deg": 17.188733853924695},
}

AGENT_DEFAULTS: dict[str, Any] = {
    "speed": 13.0,
    "x": None,
    "y": None,
    "psi_deg": None,
    "phase_deg": None,
    "radius": None,
    "heading": "tangent",
    "level": 0.0,
    "initial_errors_deg": None,
}


class ConfigError(ValueError):
    """Scenario validation failure; ``errors`` holds ``field: message`` strings."""

    def __init__(self, errors: Iterable[str]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class AgentInit:
    x: float
    y: float
    psi: float
    speed: float
    level: float
    initial_errors: dict[int, float] | None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    path: ImplicitPath
    graph: FormationGraph
    formation: FormationSpec | None
    gains: GuidanceGains
    bank_limit: float
    gravity: float
    agents: tuple[AgentInit, ...]
    network: NetworkModel
    start_time: float
    duration: float
    dt: float
    seed: int
    wind: tuple[float, float]
    band: float
    dwell: float
    transient: float
    linearity: float
    connected: bool
    raw: dict

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def ticks_every(self) -> int:
        return int(round(self.network.period / self.dt))

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_override(item: str) -> tuple[list[str], Any]:
    if "=" not in item:
        raise ConfigError([f"override {item!r}: expected key=value"])
    key, value = item.split("=", 1)
    return key.strip().split("."), yaml.safe_load(value)


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    out = copy.deepcopy(raw)
    for item in overrides:
        keys, value = parse_override(item)
        node: Any = out
        for i, key in enumerate(keys[:-1]):
            nxt = keys[i + 1]
            if isinstance(node, list):
                node = node[int(key)]
            else:
                if key not in node or node[key] is None:
                    node[key] = [] if nxt.isdigit() else {}
                node = node[key]
        last = keys[-1]
        if isinstance(node, list):
            idx = int(last)
            while len(node) <= idx:
                node.append({})
            node[idx] = value
        else:
            node[last] = value
    return out


def bundled_path(name: str) -> Path:
    ref = resources.files("circform") / "scenarios" / f"{name}.yaml"
    return Path(str(ref))


def read_raw(source: str | Path) -> dict:
    """Read a scenario file, or a bundled scenario by name."""
    p = Path(source)
    if not p.exists():
        if str(source) in BUNDLED:
            p = bundled_path(str(source))
        else:
            raise ConfigError([f"config: no such file or bundled scenario {str(source)!r}"])
    with open(p) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a mapping"])
    return data


def resolve(raw: dict, overrides: Iterable[str] = ()) -> dict:
    merged = _merge(DEFAULTS, apply_overrides(raw, overrides))
    merged["agents"] = [_merge(AGENT_DEFAULTS, a or {}) for a in merged.get("agents") or []]
    if merged["graph"]["vertices"] is None:
        merged["graph"]["vertices"] = len(merged["agents"])
    if merged["formation"]["z_star_deg"] is None:
        merged["formation"]["z_star_deg"] = [0.0] * len(merged["graph"]["edges"] or [])
    return merged


def load(source: str | Path, overrides: Iterable[str] = ()) -> ScenarioConfig:
    return build(resolve(read_raw(source), overrides))


def _num(errors: list[str], where: str, value: Any, positive: bool = False, nonneg: bool = False) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        errors.append(f"{where}: expected a number, got {value!r}")
        return math.nan
    if not math.isfinite(v):
        errors.append(f"{where}: must be finite")
    elif positive and not v > 0:
        errors.append(f"{where}: must be > 0, got {v:g}")
    elif nonneg and v < 0:
        errors.append(f"{where}: must be >= 0, got {v:g}")
    return v


def _agent(errors: list[str], i: int, a: dict, path: ImplicitPath, edge_count: int) -> AgentInit | None:
    where = f"agents[{i}]"
    speed = _num(errors, f"{where}.speed", a["speed"], positive=True)
    level = _num(errors, f"{where}.level", a["level"])
    cx, cy = path.center
    if a["x"] is not None and a["y"] is not None:
        x = _num(errors, f"{where}.x", a["x"])
        y = _num(errors, f"{where}.y", a["y"])
    elif a["phase_deg"] is not None:
        if not isinstance(path, Circle) and a["radius"] is None:
            errors.append(f"{where}.radius: required with phase_deg on non-circle paths")
            return None
        rad = _num(errors, f"{where}.radius", a["radius"] if a["radius"] is not None else path.radius, positive=True)
        # travel-aligned phase runs opposite to atan2
        ang = -math.radians(_num(errors, f"{where}.phase_deg", a["phase_deg"]))
        x, y = cx + rad * math.cos(ang), cy + rad * math.sin(ang)
    else:
        errors.append(f"{where}: give either x/y or phase_deg")
        return None
    heading = a["heading"] if a["psi_deg"] is None else a["psi_deg"]
    if heading == "tangent":
        # clockwise tangent of the circle through the start point
        psi = math.atan2(y - cy, x - cx) - 0.5 * math.pi
    elif isinstance(heading, (int, float)):
        psi = math.radians(float(heading))
    else:
        errors.append(f"{where}.heading: expected 'tangent' or degrees, got {heading!r}")
        return None
    psi = math.atan2(math.sin(psi), math.cos(psi))
    init_err = None
    if a["initial_errors_deg"] is not None:
        vals = a["initial_errors_deg"]
        if not isinstance(vals, list) or len(vals) != edge_count:
            errors.append(f"{where}.initial_errors_deg: need one entry per edge ({edge_count})")
        else:
            init_err = {k: math.radians(float(v)) for k, v in enumerate(vals) if v is not None}
    return AgentInit(x, y, psi, speed, level, init_err)


def build(raw: dict) -> ScenarioConfig:
    """Validate a resolved mapping into a :class:`ScenarioConfig`."""
    errors: list[str] = []
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported {raw.get('schema_version')!r}")
    geo = raw["geometry"]
    if geo.get("phase_convention", PHASE_CONVENTION) != PHASE_CONVENTION:
        errors.append(f"geometry.phase_convention: only {PHASE_CONVENTION!r} is supported")
    try:
        path = make_path(geo["kind"], geo["center"], geo.get("radius"), geo.get("semi_axes"))
    except (ValueError, TypeError) as exc:
        raise ConfigError([f"geometry: {exc}"]) from exc

    g = raw["graph"]
    try:
        graph = FormationGraph(int(g["vertices"]), tuple(tuple(e) for e in g["edges"] or []))
    except (GraphError, TypeError, ValueError) as exc:
        raise ConfigError([f"graph: {exc}"]) from exc
    if len(raw["agents"]) != graph.vertex_count:
        errors.append(f"agents: {len(raw['agents'])} agents for {graph.vertex_count} vertices")
    connected = is_connected(graph)
    if graph.edge_count and not connected:
        log.warning("graph is disconnected; convergence guarantees do not apply across components")

    gd = raw["guidance"]
    k_e = _num(errors, "guidance.k_e", gd["k_e"], positive=True)
    k_d = _num(errors, "guidance.k_d", gd["k_d"], positive=True)
    bank_limit = math.radians(_num(errors, "guidance.bank_limit_deg", gd["bank_limit_deg"], positive=True))
    gravity = _num(errors, "guidance.gravity", gd["gravity"], positive=True)

    fm = raw["formation"]
    k_r = _num(errors, "formation.k_r", fm["k_r"], nonneg=True)
    z_star = [math.radians(float(z)) for z in fm["z_star_deg"]]
    formation = None
    if graph.edge_count:
        if not isinstance(path, Circle):
            errors.append("graph.edges: formation control needs a circle path; ellipse runs are tracking-only")
        elif not errors:
            try:
                formation = FormationSpec(graph, tuple(z_star), k_r, path.radius)
                validate_gains(formation)
            except GainConditionError as exc:
                errors.append(f"formation.k_r: {exc}")
            except (GraphError, ValueError) as exc:
                errors.append(f"formation: {exc}")

    agents = []
    for i, a in enumerate(raw["agents"]):
        ag = _agent(errors, i, a, path, graph.edge_count)
        if ag is not None:
            agents.append(ag)

    nw, run = raw["network"], raw["run"]
    dt = _num(errors, "run.dt", run["dt"], positive=True)
    duration = _num(errors, "run.duration", run["duration"], nonneg=True)
    start = _num(errors, "run.start_time", run["start_time"])
    seed = run["seed"]
    if not isinstance(seed, int) or seed < 0:
        errors.append(f"run.seed: expected a non-negative integer, got {seed!r}")
    network = None
    try:
        network = NetworkModel(
            period=float(nw["period"]), loss=float(nw["loss"]), delay=float(nw["delay"]),
            blackouts=tuple(tuple(w) for w in nw["blackouts"] or []),
            seed=seed if isinstance(seed, int) else 0,
            position_noise=float(nw["position_noise"]),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"network: {exc}")
    if dt > 0 and math.isfinite(dt):
        for where, value in (("run.duration", duration), ("network.period", float(nw["period"]))):
            ratio = value / dt
            if abs(ratio - round(ratio)) > 1e-6:
                errors.append(f"{where}: must be a whole multiple of run.dt ({dt:g})")
    wind = raw.get("wind") or [0.0, 0.0]
    an = raw["analysis"]
    band = math.radians(_num(errors, "analysis.band_deg", an["band_deg"], positive=True))
    dwell = _num(errors, "analysis.dwell", an["dwell"], nonneg=True)
    transient = _num(errors, "analysis.transient", an["transient"], nonneg=True)
    linearity = math.radians(_num(errors, "analysis.linearity_deg", an["linearity_deg"], positive=True))
    if errors:
        raise ConfigError(errors)
    try:
        gains = GuidanceGains(k_e, k_d)
    except ValueError as exc:
        raise ConfigError([f"guidance: {exc}"]) from exc
    return ScenarioConfig(
        name=str(raw.get("name", "unnamed")), path=path, graph=graph, formation=formation,
        gains=gains, bank_limit=bank_limit, gravity=gravity, agents=tuple(agents),
        network=network, start_time=start, duration=duration, dt=dt, seed=seed,
        wind=(float(wind[0]), float(wind[1])), band=band, dwell=dwell, transient=transient,
        linearity=linearity, connected=connected, raw=raw,
    )
