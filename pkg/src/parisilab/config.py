"""Run configuration: a YAML file parsed into frozen dataclasses with path-aware validation.

Stochastic sample counts have no defaults; a command that needs one fails
validation until the config names it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .model import MixtureSpec
from .parisi import DEFAULT_NODES, RSBParams
from .rpc import DEFAULT_M
from .simulator import ENUMERATION_CAP


class ConfigError(ValueError):
    """Invalid config; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return v


def _float(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true/false, got {v!r}")
    return v


def _list(v, path, item):
    if isinstance(v, (int, float, str)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list, got {v!r}")
    return tuple(item(x, f"{path}[{i}]") for i, x in enumerate(v))


def _block(cls, raw, path):
    """Build a block dataclass from a mapping, checking keys and types by field annotation."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    kwargs = {}
    for name, value in raw.items():
        p = f"{path}.{name}"
        kind = cls.KINDS[name]
        if value is None:
            kwargs[name] = None
        elif kind == "int":
            kwargs[name] = _int(value, p, 1)
        elif kind == "float":
            kwargs[name] = _float(value, p)
        elif kind == "bool":
            kwargs[name] = _bool(value, p)
        elif kind == "ints":
            kwargs[name] = _list(value, p, lambda x, q: _int(x, q, 1))
        elif kind == "floats":
            kwargs[name] = _list(value, p, _float)
        elif kind == "strs":
            kwargs[name] = _list(value, p, lambda x, q: str(x))
        elif kind == "str":
            kwargs[name] = str(value)
    return cls(**kwargs)


@dataclass(frozen=True)
class ParisiBlock:
    KINDS = {"k_max": "int", "restarts": "int", "tolerance": "float", "max_iterations": "int",
             "nodes": "int", "m": "floats", "q": "floats"}
    k_max: int = 3
    restarts: int = 16
    tolerance: float = 1e-6
    max_iterations: int = 4000
    nodes: int = DEFAULT_NODES
    m: tuple[float, ...] | None = None
    q: tuple[float, ...] | None = None

    def params(self, path: str = "parisi") -> RSBParams:
        if self.m is None or self.q is None:
            raise ConfigError(f"{path}.m", "parameters m and q are required for this command")
        try:
            return RSBParams(self.m, self.q)
        except ValueError as exc:
            raise ConfigError(f"{path}.m", str(exc)) from None


@dataclass(frozen=True)
class SimulateBlock:
    KINDS = {"N": "ints", "n_disorder": "int", "pert": "bool", "minus": "bool"}
    N: tuple[int, ...] = ()
    n_disorder: int | None = None
    pert: bool = False
    minus: bool = False


@dataclass(frozen=True)
class RpcBlock:
    KINDS = {"M": "int", "n_samples": "int", "n_arrays": "int", "n_replicas": "int"}
    M: int = DEFAULT_M
    n_samples: int | None = None
    n_arrays: int | None = None
    n_replicas: int = 4


@dataclass(frozen=True)
class BoundsBlock:
    KINDS = {"N": "ints", "t": "floats", "n_samples": "int", "n_disorder": "int",
             "n_field_samples": "int", "pert": "bool"}
    N: tuple[int, ...] = ()
    t: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    n_samples: int | None = None
    n_disorder: int | None = None
    n_field_samples: int | None = None
    pert: bool = True


@dataclass(frozen=True)
class DiagnosticsBlock:
    KINDS = {"source": "str", "N": "ints", "pert": "bool", "queries": "strs", "n": "int", "p": "ints",
             "epsilon": "float", "n_disorder": "int", "n_arrays": "int", "n_replicas": "int"}
    source: str = "simulator"
    N: tuple[int, ...] = ()
    pert: bool = True
    queries: tuple[str, ...] = ("1", "R23")
    n: int = 3
    p: tuple[int, ...] = (1, 2)
    epsilon: float = 0.2
    n_disorder: int | None = None
    n_arrays: int | None = None
    n_replicas: int = 4


@dataclass(frozen=True)
class RunConfig:
    seed: int
    mixture: MixtureSpec
    output: str | None = None
    cap: int = ENUMERATION_CAP
    parisi: ParisiBlock = field(default_factory=ParisiBlock)
    simulate: SimulateBlock = field(default_factory=SimulateBlock)
    rpc: RpcBlock = field(default_factory=RpcBlock)
    bounds: BoundsBlock = field(default_factory=BoundsBlock)
    diagnostics: DiagnosticsBlock = field(default_factory=DiagnosticsBlock)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def digest(self) -> str:
        """Hash of the parsed config (canonical JSON), 16 hex digits."""
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def require(self, block: str, name: str):
        value = getattr(getattr(self, block), name)
        if value is None or value == ():
            raise ConfigError(f"{block}.{name}", "required for this command")
        return value


BLOCKS = {"parisi": ParisiBlock, "simulate": SimulateBlock, "rpc": RpcBlock, "bounds": BoundsBlock,
          "diagnostics": DiagnosticsBlock}


def parse_mixture(raw, path: str = "mixture") -> MixtureSpec:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a nonempty list of [p, beta_p] pairs")
    pairs = []
    for i, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"{path}[{i}]", "expected a [p, beta_p] pair")
        pairs.append((_int(item[0], f"{path}[{i}][0]", 1), _float(item[1], f"{path}[{i}][1]")))
    try:
        return MixtureSpec.from_pairs(pairs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    allowed = {"seed", "mixture", "output", "cap", *BLOCKS}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    if "seed" not in raw:
        raise ConfigError("seed", "required (no clock-based default)")
    seed = _int(raw["seed"], "seed", 0)
    if "mixture" not in raw:
        raise ConfigError("mixture", "required")
    mixture = parse_mixture(raw["mixture"])
    cap = _int(raw.get("cap", ENUMERATION_CAP), "cap", 1)
    output = raw.get("output")
    blocks = {name: _block(cls, raw.get(name), name) for name, cls in BLOCKS.items()}
    d = blocks["diagnostics"]
    if d.source not in ("simulator", "rpc"):
        raise ConfigError("diagnostics.source", "must be 'simulator' or 'rpc'")
    if not 0 < d.epsilon:
        raise ConfigError("diagnostics.epsilon", "must be positive")
    for i, t in enumerate(blocks["bounds"].t):
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"bounds.t[{i}]", "must lie in [0, 1]")
    for block in ("simulate", "bounds", "diagnostics"):
        for i, n in enumerate(getattr(blocks[block], "N")):
            if n > cap:
                raise ConfigError(f"{block}.N[{i}]", f"{n} exceeds the enumeration cap {cap}")
    return RunConfig(seed, mixture, None if output is None else str(output), cap, raw=raw, **blocks)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"YAML parse error: {exc}") from None
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    return config_from_dict(raw)
