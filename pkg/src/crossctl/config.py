"""YAML scenario documents.

Keys carry their units (``dt_s``, ``v0_mps``, ...). :func:`load_config` returns the plain
tree, :func:`config_to_scenario` validates it into a :class:`Scenario`, and
:func:`scenario_to_config` goes the other way. Validation errors name the offending line.

A minimal document::

    controller: proposed
    dt_s: 0.01
    t_end_s: 20
    lanes:
      - {id: A, length_m: 60, nodes: [{id: X, p_m: 30}]}
    vehicles:
      - {id: 0, lane: A, t_spawn_s: 0, p0_m: 0, v0_mps: 25}

``vehicles`` may be replaced by a ``random`` block (``seed``, ``n_vehicles``,
``spawn_window_s``) that draws a two-lane scenario.
"""
from __future__ import annotations

import math
from typing import Any, Dict, Optional

import yaml

from .coordinator import SignalPhase, SignalProgram
from .core import ParameterError, VehicleParams
from .simulator import BRAKING_POINT, PROPOSED, Lane, Scenario, ScenarioError, VehicleSpec

PARAM_KEYS = {
    "v_d_mps": "v_d",
    "alpha_per_s": "alpha",
    "u_max_mps2": "u_max",
    "gamma_m": "gamma",
    "kappa_T": "kappa_T",
    "kappa_R": "kappa_R",
}
MODES = ("unsignalized", "signalized")


class ConfigError(ValueError):
    """Malformed scenario document; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class _Map(dict):
    """Mapping that remembers the source line of each key."""

    line: Optional[int] = None
    key_lines: Dict[str, int]


class _List(list):
    line: Optional[int] = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", k_node.start_mark.line + 1)
        out[key] = loader.construct_object(v_node, deep=True)
        out.key_lines[key] = k_node.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _List(loader.construct_object(n, deep=True) for n in node.value)
    out.line = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


def parse_config(text: str):
    """Parse YAML text into a tree of dicts and lists that remember their source lines."""
    try:
        tree = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(exc.problem or str(exc), mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc)) from None
    if not isinstance(tree, dict):
        raise ConfigError("top level must be a mapping", 1)
    return tree


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _plain(tree):
    if isinstance(tree, dict):
        return {k: _plain(v) for k, v in tree.items()}
    if isinstance(tree, list):
        return [_plain(v) for v in tree]
    return tree


def dump_config(tree) -> str:
    return yaml.safe_dump(_plain(tree), sort_keys=False, default_flow_style=None)


def save_config(tree, path) -> None:
    from .outputs import atomic_write_text

    atomic_write_text(path, dump_config(tree))


# ------------------------------------------------------------------ validation

def _line(obj, key=None) -> Optional[int]:
    if key is not None and isinstance(obj, _Map):
        return obj.key_lines.get(key, obj.line)
    return getattr(obj, "line", None)


def _number(obj, key, default=None, *, required=False) -> float:
    if key not in obj:
        if required:
            raise ConfigError(f"missing required key {key!r}", _line(obj))
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{key} must be a finite number, got {val!r}", _line(obj, key))
    return float(val)


def _mapping(obj, where: str, line=None):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a mapping", getattr(obj, "line", line))
    return obj


def _sequence(obj, key):
    val = obj.get(key)
    if not isinstance(val, list):
        raise ConfigError(f"{key} must be a list", _line(obj, key))
    return val


def _check_keys(obj, allowed, where):
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in {where}", _line(obj, k))


def _params(obj, base: VehicleParams) -> VehicleParams:
    if obj is None:
        return base
    _mapping(obj, "params")
    _check_keys(obj, PARAM_KEYS, "params")
    values = {field: getattr(base, field) for field in PARAM_KEYS.values()}
    for key, field in PARAM_KEYS.items():
        values[field] = _number(obj, key, values[field])
    try:
        return VehicleParams(**values)
    except ParameterError as exc:
        key = next(k for k, f in PARAM_KEYS.items() if f == exc.field)
        raise ConfigError(str(exc), _line(obj, key)) from None


_TOP_KEYS = ("name", "controller", "mode", "dt_s", "t_end_s", "tau_sep_s", "dwell_s",
             "response_delay_s", "seed", "rear_end_signal", "params", "lanes", "vehicles",
             "random", "signal")


def config_to_scenario(tree, *, dt: Optional[float] = None, controller: Optional[str] = None) -> Scenario:
    """Validate a parsed document; ``dt`` and ``controller`` override the file when given."""
    from .scenarios import random_scenario, two_lane_lanes

    _mapping(tree, "document", 1)
    _check_keys(tree, _TOP_KEYS, "document")
    base = _params(tree.get("params"), VehicleParams())
    mode = tree.get("mode", "unsignalized")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}", _line(tree, "mode"))
    kwargs: Dict[str, Any] = dict(
        name=str(tree.get("name", "scenario")),
        controller=controller or tree.get("controller", PROPOSED),
        dt=dt if dt is not None else _number(tree, "dt_s", 0.01),
        t_end=_number(tree, "t_end_s", 25.0),
        tau_sep=_number(tree, "tau_sep_s", 0.5),
        dwell=_number(tree, "dwell_s", None),
        response_delay=_number(tree, "response_delay_s", 0.0),
        rear_end_signal=tree.get("rear_end_signal", BRAKING_POINT),
    )
    seed = tree.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError(f"seed must be an integer, got {seed!r}", _line(tree, "seed"))

    if "random" in tree:
        if "vehicles" in tree:
            raise ConfigError("give either vehicles or random, not both", _line(tree, "random"))
        rnd = _mapping(tree["random"], "random", _line(tree, "random"))
        _check_keys(rnd, ("seed", "n_vehicles", "spawn_window_s"), "random")
        rseed = rnd.get("seed", seed)
        if not isinstance(rseed, int) or isinstance(rseed, bool):
            raise ConfigError("random.seed must be an integer", _line(rnd, "seed"))
        n = rnd.get("n_vehicles")
        if n is not None and (not isinstance(n, int) or isinstance(n, bool) or n < 1):
            raise ConfigError("random.n_vehicles must be a positive integer", _line(rnd, "n_vehicles"))
        drawn = random_scenario(rseed, n, _number(rnd, "spawn_window_s", 10.0), params=base,
                                controller=kwargs["controller"], dt=kwargs["dt"])
        lanes, vehicles, seed = two_lane_lanes(), drawn.vehicles, rseed
        if "t_end_s" not in tree:
            kwargs["t_end"] = drawn.t_end
    else:
        lanes = _lanes(tree)
        vehicles = _vehicles(tree, base)

    signal = None
    if mode == "signalized":
        signal = _signal(tree)
    elif "signal" in tree:
        raise ConfigError("signal given but mode is unsignalized", _line(tree, "signal"))
    try:
        return Scenario(lanes, vehicles, signal=signal, seed=seed, **kwargs)
    except (ScenarioError, ParameterError) as exc:
        raise ConfigError(str(exc), _line(tree)) from None


def _lanes(tree):
    out = []
    for item in _sequence(tree, "lanes"):
        lane = _mapping(item, "lane entry", _line(tree, "lanes"))
        _check_keys(lane, ("id", "length_m", "nodes"), "lane")
        if "id" not in lane:
            raise ConfigError("lane needs an id", _line(lane))
        nodes = {}
        for nd in lane.get("nodes") or []:
            nd = _mapping(nd, "node entry", _line(lane, "nodes"))
            _check_keys(nd, ("id", "p_m"), "node")
            if "id" not in nd:
                raise ConfigError("node needs an id", _line(nd))
            nodes[nd["id"]] = _number(nd, "p_m", required=True)
        try:
            out.append(Lane(lane["id"], _number(lane, "length_m", required=True), nodes))
        except ScenarioError as exc:
            raise ConfigError(str(exc), _line(lane)) from None
    return tuple(out)


def _vehicles(tree, base):
    out = []
    for item in _sequence(tree, "vehicles"):
        veh = _mapping(item, "vehicle entry", _line(tree, "vehicles"))
        _check_keys(veh, ("id", "lane", "t_spawn_s", "p0_m", "v0_mps", "params"), "vehicle")
        vid = veh.get("id")
        if not isinstance(vid, int) or isinstance(vid, bool):
            raise ConfigError(f"vehicle id must be an integer, got {vid!r}", _line(veh, "id"))
        if "lane" not in veh:
            raise ConfigError("vehicle needs a lane", _line(veh))
        out.append(VehicleSpec(vid, veh["lane"], _number(veh, "t_spawn_s", 0.0),
                               _number(veh, "p0_m", 0.0), _number(veh, "v0_mps", required=True),
                               _params(veh.get("params"), base)))
    return tuple(out)


def _signal(tree):
    sig = _mapping(tree.get("signal"), "signal", _line(tree, "signal") or _line(tree))
    phases = {}
    for ph in _sequence(sig, "phases"):
        ph = _mapping(ph, "phase entry", _line(sig, "phases"))
        _check_keys(ph, ("lane", "cycle_s", "offset_s", "green_s", "node", "p_m"), "phase")
        try:
            phases[ph.get("lane")] = SignalPhase(
                _number(ph, "cycle_s", required=True), _number(ph, "offset_s", 0.0),
                _number(ph, "green_s", required=True), ph.get("node", "stopline"), _number(ph, "p_m", 0.0))
        except ParameterError as exc:
            raise ConfigError(str(exc), _line(ph)) from None
    return SignalProgram(phases)


# ------------------------------------------------------------------ serialization

def _params_tree(prm: VehicleParams) -> dict:
    return {key: getattr(prm, field) for key, field in PARAM_KEYS.items()}


def scenario_to_config(sc: Scenario) -> dict:
    """Document that :func:`config_to_scenario` maps back to an equal scenario."""
    base = sc.vehicles[0].params if sc.vehicles else VehicleParams()
    tree: Dict[str, Any] = {
        "name": sc.name,
        "controller": sc.controller,
        "mode": "signalized" if sc.signal is not None else "unsignalized",
        "dt_s": sc.dt,
        "t_end_s": sc.t_end,
        "tau_sep_s": sc.tau_sep,
    }
    if sc.dwell is not None:
        tree["dwell_s"] = sc.dwell
    tree["response_delay_s"] = sc.response_delay
    tree["seed"] = sc.seed
    tree["rear_end_signal"] = sc.rear_end_signal
    tree["params"] = _params_tree(base)
    tree["lanes"] = [
        {"id": lane.lane_id, "length_m": lane.length,
         "nodes": [{"id": k, "p_m": p} for k, p in lane.nodes.items()]}
        for lane in sc.lanes
    ]
    vehicles = []
    for v in sc.vehicles:
        entry = {"id": v.vehicle_id, "lane": v.lane, "t_spawn_s": v.t_spawn, "p0_m": v.p0, "v0_mps": v.v0}
        if v.params != base:
            entry["params"] = _params_tree(v.params)
        vehicles.append(entry)
    tree["vehicles"] = vehicles
    if sc.signal is not None:
        tree["signal"] = {"phases": [
            {"lane": lane, "cycle_s": ph.cycle_s, "offset_s": ph.offset_s, "green_s": ph.green_s,
             "node": ph.node_id, "p_m": ph.p_node}
            for lane, ph in sc.signal.phases.items()
        ]}
    return tree
