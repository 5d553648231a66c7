"""Plain-text run configuration (INI syntax).

Every key has a built-in default; a file only overrides. Unknown sections
or keys are errors. Example::

    [corruption]
    snr_low = -6
    snr_high = 14
    clip_probability = 0.75

    [train]
    learning_rate = 0.0005
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace

from .corruption import CorruptionDistributions, Uniform
from .data import SynthesisConfig
from .errors import ConfigError, StormWindError
from .sde import SGMSE_PARAMS, SGMSE_SAMPLER, STORM_PARAMS, STORM_SAMPLER, OuveParams, SamplerConfig
from .spectral import StftConfig
from .training import TrainConfig


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 32
    dilations: tuple = (1, 2, 4, 8)
    emb_dim: int = 32
    predictor_channels: int = 32
    predictor_dilations: tuple = (1, 2, 4, 8)


@dataclass(frozen=True)
class FrontEndConfig:
    window_len: int = 510
    hop: int = 128
    exponent: float = 0.5
    scale: float = 1.0
    # chunked long-utterance processing is reserved; utterances are processed whole
    chunk_seconds: float = 0.0

    def __post_init__(self):
        if self.chunk_seconds != 0.0:
            raise ConfigError("chunked processing is not supported; leave chunk_seconds = 0")


@dataclass(frozen=True)
class DataSplitConfig:
    validation_fraction: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    sde: OuveParams = STORM_PARAMS
    sampler: SamplerConfig = STORM_SAMPLER
    baseline_sde: OuveParams = SGMSE_PARAMS
    baseline_sampler: SamplerConfig = SGMSE_SAMPLER
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    frontend: FrontEndConfig = field(default_factory=FrontEndConfig)
    split: DataSplitConfig = field(default_factory=DataSplitConfig)

    @property
    def stft(self) -> StftConfig:
        return StftConfig(self.frontend.window_len, self.frontend.hop)


_UNIFORM_FIELDS = [f.name for f in fields(CorruptionDistributions) if f.name != "clip_probability"]


def _parse_value(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if default is None or isinstance(default, str):
            v = raw.strip()
            return None if v.lower() in ("", "none") else v
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unsupported type for {key}")


def _override(obj, section: dict, name: str, skip=()):
    known = {f.name: getattr(obj, f.name) for f in fields(obj) if f.name not in skip}
    updates = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        updates[key] = _parse_value(raw, known[key], f"{name}.{key}")
    try:
        return replace(obj, **updates)
    except (StormWindError, TypeError) as exc:
        raise ConfigError(f"invalid [{name}] settings: {exc}") from exc


def _override_corruption(dists: CorruptionDistributions, section: dict) -> CorruptionDistributions:
    updates = {}
    for key, raw in section.items():
        if key == "clip_probability":
            updates[key] = _parse_value(raw, 0.0, "corruption.clip_probability")
            continue
        base, _, end = key.rpartition("_")
        if base not in _UNIFORM_FIELDS or end not in ("low", "high"):
            raise ConfigError(f"unknown key {key!r} in section [corruption]")
        updates.setdefault(base, {})[end] = _parse_value(raw, 0.0, f"corruption.{key}")
    kwargs = {}
    try:
        for name, val in updates.items():
            if name == "clip_probability":
                kwargs[name] = val
            else:
                cur = getattr(dists, name)
                kwargs[name] = Uniform(val.get("low", cur.low), val.get("high", cur.high))
        return replace(dists, **kwargs)
    except StormWindError as exc:
        raise ConfigError(f"invalid [corruption] settings: {exc}") from exc


SECTIONS = ("synthesis", "corruption", "sde", "sampler", "baseline_sde", "baseline_sampler", "train", "model", "frontend", "split")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = RunConfig()
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]")
    if cp.defaults():
        raise ConfigError(f"{source}: keys outside a section are not allowed")
    sec = {name: dict(cp.items(name)) for name in cp.sections()}
    synth = cfg.synthesis
    if "corruption" in sec:
        synth = replace(synth, corruption=_override_corruption(synth.corruption, sec["corruption"]))
    if "synthesis" in sec:
        synth = _override(synth, sec["synthesis"], "synthesis", skip=("corruption",))
    out = {"synthesis": synth}
    for name in ("sde", "sampler", "baseline_sde", "baseline_sampler", "train", "model", "frontend", "split"):
        obj = getattr(cfg, name)
        out[name] = _override(obj, sec[name], name) if name in sec else obj
    return RunConfig(**out)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    return d
