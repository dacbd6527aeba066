"""Scenario files: JSON descriptions of one model run.

A scenario bundles the model fields, the initial history, optional exact
overrides for sampled aggregates, and run controls. Parsing is strict:
unknown keys and wrong types fail with the offending field path, so a typo
in a JSON file points at itself. ``to_dict`` returns the original data, so
serialize(parse(file)) round-trips field-identically.
"""

import copy
import json
import math

from .errors import ExprError, ScenarioError
from .model import DelayPair, InitialHistory, NicholsonModel

OVERRIDE_KEYS = ("zeta_M", "beta_inf", "beta_sup", "tau_max")
RUN_KEYS = ("T", "h", "tail_window")

_TOP_KEYS = ("delta", "beta", "t0", "pairs", "history", "overrides", "run")
_PAIR_KEYS = ("p", "a", "tau", "sigma")


def _require_dict(value, path):
    if not isinstance(value, dict):
        raise ScenarioError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _number(data, key, path, default=None, required=True):
    if key not in data:
        if required:
            raise ScenarioError(f"{path}{key}: missing required field")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(
            f"{path}{key}: expected a number, got {type(value).__name__}"
        )
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"{path}{key}: must be finite")
    return value


def _expr(data, key, path):
    if key not in data:
        raise ScenarioError(f"{path}{key}: missing required field")
    value = data[key]
    if not isinstance(value, str):
        raise ScenarioError(
            f"{path}{key}: expected an expression string, got {type(value).__name__}"
        )
    return value


def _reject_unknown(data, allowed, path):
    for key in data:
        if key not in allowed:
            raise ScenarioError(f"{path}{key}: unknown field")


class Scenario:
    """Parsed scenario plus the raw data it came from."""

    def __init__(self, data, name=None):
        data = _require_dict(data, "scenario")
        _reject_unknown(data, _TOP_KEYS, "")
        self.name = name
        self.data = copy.deepcopy(data)
        delta = _number(data, "delta", "")
        beta = _expr(data, "beta", "")
        t0 = _number(data, "t0", "", default=0.0, required=False)
        raw_pairs = data.get("pairs")
        if not isinstance(raw_pairs, list) or not raw_pairs:
            raise ScenarioError("pairs: expected a nonempty list")
        pairs = []
        for j, raw in enumerate(raw_pairs):
            path = f"pairs[{j}]."
            _reject_unknown(_require_dict(raw, f"pairs[{j}]"), _PAIR_KEYS, path)
            pairs.append(
                (
                    _number(raw, "p", path),
                    _number(raw, "a", path),
                    _expr(raw, "tau", path),
                    _expr(raw, "sigma", path),
                )
            )
        history = _expr(data, "history", "")
        overrides = _require_dict(data.get("overrides", {}), "overrides")
        _reject_unknown(overrides, OVERRIDE_KEYS, "overrides.")
        self.overrides = {
            key: _number(overrides, key, "overrides.") for key in overrides
        }
        run = _require_dict(data.get("run", {}), "run")
        _reject_unknown(run, RUN_KEYS, "run.")
        self.run = {key: _number(run, key, "run.") for key in run}

        try:
            self.model = NicholsonModel(
                delta=delta,
                beta=beta,
                pairs=[DelayPair(p=p, a=a, tau=tau, sigma=sg) for p, a, tau, sg in pairs],
                t0=t0,
            )
        except ExprError as exc:
            raise ScenarioError(f"model expression: {exc}") from exc
        try:
            self.history = InitialHistory(history)
        except ExprError as exc:
            raise ScenarioError(f"history: {exc}") from exc

    def to_dict(self):
        return copy.deepcopy(self.data)

    def with_values(self, assignment):
        """New Scenario with dotted-path fields replaced (sweep support)."""
        data = self.to_dict()
        for path, value in assignment.items():
            set_path(data, path, value)
        return Scenario(data, name=self.name)


def parse_scenario(data, name=None):
    return Scenario(data, name=name)


def loads(text, name=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from exc
    return Scenario(data, name=name)


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads(text, name=str(path))


def dumps(scenario):
    return json.dumps(scenario.to_dict(), indent=2)


# Built-in scenarios. "3.9" has two delay pairs sharing the equilibrium at 5;
# "3.10" scales the recruitment down so the equilibrium has no closed form.
# Both carry exact zeta_M overrides under which a global-attractivity
# criterion is satisfied.
BUILTIN_SCENARIOS = {
    "3.9": {
        "delta": 0.1,
        "beta": "1 + sin(t)^2",
        "t0": 0.0,
        "pairs": [
            {"p": 0.06 * math.e**4, "a": 0.8, "tau": "1", "sigma": "abs(cos(t))"},
            {"p": 0.04 * math.e**5, "a": 1.0, "tau": "1", "sigma": "abs(cos(2*t))"},
        ],
        "history": "1",
        "overrides": {"zeta_M": 1.5},
        "run": {"T": 600.0},
    },
    "3.10": {
        "delta": 0.09,
        "beta": "1 + sin(t)^2",
        "t0": 0.0,
        "pairs": [
            {"p": 0.06, "a": 0.8, "tau": "1", "sigma": "abs(cos(t))"},
            {"p": 0.04, "a": 1.0, "tau": "1", "sigma": "abs(cos(2*t))"},
        ],
        "history": "1",
        "overrides": {"zeta_M": 23.0},
        "run": {"T": 600.0},
    },
}


def builtin(name):
    if name not in BUILTIN_SCENARIOS:
        known = ", ".join(sorted(BUILTIN_SCENARIOS))
        raise ScenarioError(f"unknown built-in scenario {name!r} (known: {known})")
    return Scenario(BUILTIN_SCENARIOS[name], name=name)


# Dotted-path access for sweeps: "delta", "pairs[0].p", "overrides.zeta_M".


def _split_path(path):
    parts = []
    for token in path.split("."):
        if not token:
            raise ScenarioError(f"sweep path {path!r}: empty segment")
        if "[" in token:
            name, _, rest = token.partition("[")
            if not rest.endswith("]"):
                raise ScenarioError(f"sweep path {path!r}: malformed index")
            try:
                idx = int(rest[:-1])
            except ValueError:
                raise ScenarioError(f"sweep path {path!r}: malformed index") from None
            parts.append(name)
            parts.append(idx)
        else:
            parts.append(token)
    return parts


def set_path(data, path, value):
    """Assign a numeric scenario field by dotted path.

    The field must already exist and be numeric, except under ``overrides``
    and ``run`` where new keys may be introduced.
    """
    parts = _split_path(path)
    last = parts[-1]
    if isinstance(last, int):
        raise ScenarioError(f"sweep path {path!r}: must end at a scalar field")
    creatable = False
    if len(parts) == 2 and parts[0] in ("overrides", "run"):
        allowed = OVERRIDE_KEYS if parts[0] == "overrides" else RUN_KEYS
        if last not in allowed:
            raise ScenarioError(f"sweep path {path!r}: no field {last!r}")
        creatable = True
    node = data
    for i, part in enumerate(parts[:-1]):
        if isinstance(part, int):
            if not isinstance(node, list) or not 0 <= part < len(node):
                raise ScenarioError(f"sweep path {path!r}: index {part} out of range")
            node = node[part]
        else:
            if creatable and i == 0:
                node = data.setdefault(part, {})
            elif isinstance(node, dict) and part in node:
                node = node[part]
            else:
                raise ScenarioError(f"sweep path {path!r}: no field {part!r}")
    if last not in node and not creatable:
        raise ScenarioError(f"sweep path {path!r}: no field {last!r}")
    existing = node.get(last)
    if existing is not None and not isinstance(existing, (int, float)):
        raise ScenarioError(f"sweep path {path!r}: field is not numeric")
    node[last] = float(value)


class SweepParam:
    def __init__(self, data):
        data = _require_dict(data, "sweep param")
        _reject_unknown(data, ("path", "lo", "hi", "count"), "sweep param ")
        if "path" not in data or not isinstance(data["path"], str):
            raise ScenarioError("sweep param: 'path' must be a string")
        self.path = data["path"]
        _split_path(self.path)
        self.lo = _number(data, "lo", "sweep param ")
        self.hi = _number(data, "hi", "sweep param ")
        count = data.get("count")
        if not isinstance(count, int) or isinstance(count, bool) or count < 2:
            raise ScenarioError("sweep param: 'count' must be an integer >= 2")
        self.count = count

    def values(self):
        step = (self.hi - self.lo) / (self.count - 1)
        return [self.lo + i * step for i in range(self.count)]


class SweepSpec:
    """One or two swept parameters plus what to evaluate at each point."""

    def __init__(self, data):
        data = _require_dict(data, "sweep spec")
        _reject_unknown(data, ("params", "criteria", "simulate"), "sweep ")
        raw = data.get("params")
        if not isinstance(raw, list) or not 1 <= len(raw) <= 2:
            raise ScenarioError("sweep.params: expected a list of one or two entries")
        self.params = [SweepParam(entry) for entry in raw]
        criteria = data.get("criteria")
        if criteria is not None:
            if not isinstance(criteria, list) or not all(
                isinstance(c, str) for c in criteria
            ):
                raise ScenarioError("sweep.criteria: expected a list of names")
        self.criteria = criteria
        simulate = data.get("simulate", False)
        if not isinstance(simulate, bool):
            raise ScenarioError("sweep.simulate: expected true or false")
        self.simulate = simulate

    def points(self):
        """Grid assignments in row-major order (last parameter fastest)."""
        grids = [param.values() for param in self.params]
        paths = [param.path for param in self.params]
        if len(grids) == 1:
            return [{paths[0]: v} for v in grids[0]]
        return [
            {paths[0]: v0, paths[1]: v1} for v0 in grids[0] for v1 in grids[1]
        ]


def parse_sweep(data):
    return SweepSpec(data)
