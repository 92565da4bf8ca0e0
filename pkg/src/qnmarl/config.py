"""Run configuration: defaults, then a TOML file, then ``--section.key=value`` flags.

Every key lives under one of the sections ``train``, ``world``, ``qaoa``,
``lif``, ``snn`` or ``output``.  The file may use TOML tables or dotted keys;
both flatten to the same paths.
"""

import difflib
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError, QnmarlError
from .gridworld import WorldConfig
from .harness import SNN_DEFAULTS, TrainConfig
from .qaoa import QaoaPolicy
from .snn import LifConfig

QAOA_KEYS = ("n_qubits", "depth_p", "shots", "temporal_reg", "input_angles_scale")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/latest"
    plots: bool = True


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    world: WorldConfig = field(default_factory=WorldConfig)
    qaoa: dict = field(default_factory=dict)
    lif: LifConfig = field(default_factory=LifConfig)
    snn: dict = field(default_factory=lambda: dict(SNN_DEFAULTS))
    output: OutputConfig = field(default_factory=OutputConfig)

    def qaoa_policy(self) -> QaoaPolicy:
        return QaoaPolicy(**self.qaoa)

    def flat(self) -> dict:
        out = {}
        for section, obj in self._sections().items():
            values = obj if isinstance(obj, dict) else {f.name: getattr(obj, f.name)
                                                          for f in fields(obj)}
            for k, v in values.items():
                out[f"{section}.{k}"] = list(v) if isinstance(v, tuple) else v
        return out

    def _sections(self):
        q = QaoaPolicy()
        qaoa = {k: self.qaoa.get(k, getattr(q, k)) for k in QAOA_KEYS}
        return {"train": self.train, "world": self.world, "qaoa": qaoa, "lif": self.lif,
                "snn": self.snn, "output": self.output}


def _schema() -> dict:
    """Flat key -> default value for every accepted key."""
    return RunConfig().flat()


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in table.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, path + "."))
        else:
            out[path] = v
    return out


def _coerce(key: str, value, default):
    """Convert ``value`` (from TOML or a flag string) to the type of ``default``."""
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("true", "1", "yes", "on"):
                    return True
                if low in ("false", "0", "no", "off"):
                    return False
                raise ValueError(value)
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if isinstance(default, int):
            if isinstance(value, bool):
                raise ValueError(value)
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError(value)
                return int(value)
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [int(x) for x in value.strip("[]() ").split(",") if x.strip()]
            return [int(x) for x in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {type(default).__name__}") \
            from None


def _unknown(key: str, known) -> ConfigError:
    close = difflib.get_close_matches(key, known, n=1)
    if not close:
        # Also try matching the last path component.
        tail = {k.split(".")[-1]: k for k in known}
        hit = difflib.get_close_matches(key.split(".")[-1], list(tail), n=1)
        close = [tail[hit[0]]] if hit else []
    hint = f" (did you mean {close[0]!r}?)" if close else ""
    return ConfigError(f"unknown configuration key {key!r}{hint}")


def parse_flags(argv) -> dict:
    """``['--train.episodes=10', ...]`` -> ``{'train.episodes': '10'}``."""
    out = {}
    for arg in argv:
        if not arg.startswith("--") or "=" not in arg:
            raise ConfigError(f"expected --section.key=value, got {arg!r}")
        k, v = arg[2:].split("=", 1)
        out[k] = v
    return out


def load_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``; fully validated."""
    schema = _schema()
    values = dict(schema)
    layers = []
    if path is not None:
        try:
            with open(path, "rb") as fh:
                layers.append(_flatten(tomllib.load(fh)))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    layers.append(dict(overrides or {}))
    for layer in layers:
        for key, raw in layer.items():
            if key not in schema:
                raise _unknown(key, list(schema))
            values[key] = _coerce(key, raw, schema[key])
    return build(values)


def build(values: dict) -> RunConfig:
    section = {}
    for key, v in values.items():
        s, k = key.split(".", 1)
        section.setdefault(s, {})[k] = v
    world = dict(section["world"])
    world["dims"] = tuple(world["dims"])
    try:
        cfg = RunConfig(
            train=TrainConfig(**section["train"]).validate(),
            world=WorldConfig(**world).validate(),
            qaoa=dict(section["qaoa"]),
            lif=LifConfig(**section["lif"]),
            snn=dict(section["snn"]),
            output=OutputConfig(**section["output"]),
        )
        cfg.qaoa_policy()
    except ConfigError:
        raise
    except (QnmarlError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.snn["n_hidden"] < 1 or cfg.snn["window"] <= 0 or cfg.snn["alpha"] <= 0:
        raise ConfigError("snn.n_hidden, snn.window and snn.alpha must be positive")
    return cfg


def with_output_dir(cfg: RunConfig, directory) -> RunConfig:
    return replace(cfg, output=replace(cfg.output, dir=str(Path(directory))))
