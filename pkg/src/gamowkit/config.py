"""Run configuration: one TOML document per run, one table per subcommand.

Example::

    command = "synth"
    seed = 42

    [synth]
    kind = "relbw"
    convention = "polesqrt"
    m = 91.1611
    gamma = 2.4943
    out = "z.csv"
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError


@dataclass
class ConvertSpec:
    from_convention: str = "onshell"
    m: Optional[float] = None
    gamma: Optional[float] = None
    to_convention: str = "polesqrt"


@dataclass
class SynthSpec:
    kind: str = "relbw"
    convention: str = "polesqrt"
    m: float = 91.1611
    gamma: float = 2.4943
    residue: float = 1.0
    residue_im: float = 0.0
    background: list = field(default_factory=list)
    x_min: float = 88.0
    x_max: float = 94.0
    points: int = 200
    noise: float = 0.01
    out: str = "synth.csv"


@dataclass
class FitSpec:
    data: Optional[str] = None
    kind: str = "relbw"
    convention: str = "polesqrt"
    m: Optional[float] = None
    gamma: Optional[float] = None
    residue: Optional[float] = None
    background: list = field(default_factory=list)
    max_iter: int = 200
    out: Optional[str] = None


@dataclass
class EvolveSpec:
    z_real: float = 1.0
    gamma: float = 0.1
    order: int = 2
    t_max: float = 5.0
    steps: int = 100
    out: str = "evolve.csv"


@dataclass
class SurvivalSpec:
    er_over_gamma: float = 50.0
    gamma: float = 1.0
    t_max: float = 40.0
    steps: int = 400
    out: str = "survival.csv"


SECTIONS = {
    "convert": ConvertSpec,
    "synth": SynthSpec,
    "fit": FitSpec,
    "evolve": EvolveSpec,
    "survival": SurvivalSpec,
}


@dataclass
class RunConfig:
    command: Optional[str] = None
    seed: int = 0
    output_dir: Optional[str] = None
    convert: ConvertSpec = field(default_factory=ConvertSpec)
    synth: SynthSpec = field(default_factory=SynthSpec)
    fit: FitSpec = field(default_factory=FitSpec)
    evolve: EvolveSpec = field(default_factory=EvolveSpec)
    survival: SurvivalSpec = field(default_factory=SurvivalSpec)

    def section(self, name: str):
        return getattr(self, name)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if dataclasses.is_dataclass(val):
                val = {k: v for k, v in dataclasses.asdict(val).items() if v is not None}
            if val is not None:
                out[f.name] = val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        kwargs = {}
        for name, spec_cls in SECTIONS.items():
            table = data.pop(name, {})
            if not isinstance(table, dict):
                raise ValidationError(f"[{name}] must be a table")
            known = {f.name: f for f in dataclasses.fields(spec_cls)}
            unknown = set(table) - set(known)
            if unknown:
                raise ValidationError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
            kwargs[name] = spec_cls(**table)
        for key in ("command", "seed", "output_dir"):
            if key in data:
                kwargs[key] = data.pop(key)
        if data:
            raise ValidationError(f"unknown top-level key(s): {', '.join(sorted(data))}")
        cfg = cls(**kwargs)
        if cfg.command is not None and cfg.command not in SECTIONS:
            raise ValidationError(f"unknown command {cfg.command!r}")
        if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
            raise ValidationError(f"seed must be an integer, got {cfg.seed!r}")
        return cfg

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"malformed config: {exc}") from None
        except TypeError as exc:
            raise ValidationError(f"bad config value: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return RunConfig.loads(text)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.dumps(), encoding="utf-8")
