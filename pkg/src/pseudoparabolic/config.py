"""Experiment and sweep configuration, read from and written to TOML.

A config file has the sections ``[problem]``, ``[initial]``, ``[stepper]``,
``[constants]`` and ``[output]``; a sweep file adds ``[sweep]`` with a list
of ``[[sweep.axis]]`` tables, each naming a dotted config path and values.
Every key has a documented default (see the dataclasses below), so the
canonical form written by :func:`dumps` fully specifies a run.
"""

from __future__ import annotations

import copy
import itertools
import sys
from dataclasses import asdict, dataclass, field, fields

import tomli_w

from .dynamics import StepperConfig
from .errors import ConfigError
from .operators import BASE_SHAPES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REGIMES = ("StableWell", "UnstableWell", "NegativeEnergy")


@dataclass
class ProblemSpec:
    field_family: str = "grushin"  # builtin name or path to a field-spec file
    dim: int | None = None  # only for builtin laplacian
    domain: list = field(default_factory=lambda: [-1.0, 1.0, -1.0, 1.0])
    grid: list = field(default_factory=lambda: [32, 32])
    p: float = 3.0


@dataclass
class InitialSpec:
    base_shape: str = "sine_product"
    regime: str | None = "StableWell"
    target_j0: float | None = None
    target_j0_over_d: float | None = None
    explicit_scale: float | None = None


@dataclass
class ConstantsSpec:
    probes: int = 100


@dataclass
class OutputSpec:
    dir: str = "out"
    seed: int = 0
    threads: int = 1
    format: str = "json"
    refine: bool = False  # also run with halved step caps (energy-identity ratio)
    plots: bool = True


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    constants: ConstantsSpec = field(default_factory=ConstantsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def validate(self) -> "ExperimentConfig":
        pr, ini = self.problem, self.initial
        if len(pr.domain) != 2 * len(pr.grid):
            raise ConfigError(f"[problem] domain has {len(pr.domain)} numbers but grid has {len(pr.grid)} axes; "
                              "give lower,upper per axis")
        if any(int(n) < 1 for n in pr.grid):
            raise ConfigError("[problem] grid sizes must be positive")
        if not pr.p > 1:
            raise ConfigError(f"[problem] p={pr.p} must exceed 1")
        if ini.base_shape not in BASE_SHAPES:
            raise ConfigError(f"[initial] base_shape must be one of {sorted(BASE_SHAPES)}")
        if (ini.regime is None) == (ini.explicit_scale is None):
            raise ConfigError("[initial] give exactly one of regime / explicit_scale")
        if ini.regime is not None and ini.regime not in REGIMES:
            raise ConfigError(f"[initial] regime must be one of {REGIMES}")
        if ini.target_j0 is not None and ini.target_j0_over_d is not None:
            raise ConfigError("[initial] give at most one of target_j0 / target_j0_over_d")
        if ini.explicit_scale is not None and (ini.target_j0 is not None or ini.target_j0_over_d is not None):
            raise ConfigError("[initial] targets only apply with regime")
        if self.output.format not in ("csv", "json"):
            raise ConfigError("[output] format must be csv or json")
        if self.output.threads < 1:
            raise ConfigError("[output] threads must be >= 1")
        return self


SECTIONS = {"problem": ProblemSpec, "initial": InitialSpec, "stepper": StepperConfig,
            "constants": ConstantsSpec, "output": OutputSpec}


def _build(cls, section: str, data: dict):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{section}]; allowed: {sorted(allowed)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; allowed: {sorted(SECTIONS)}")
    data = {k: dict(v) for k, v in data.items()}
    ini = data.setdefault("initial", {})
    if "explicit_scale" in ini and "regime" not in ini:
        ini["regime"] = None  # the default regime yields to an explicit scale
    parts = {name: _build(cls, name, data.get(name, {})) for name, cls in SECTIONS.items()}
    return ExperimentConfig(**parts).validate()


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in SECTIONS:
        sec = asdict(getattr(cfg, name))
        out[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sec.items() if v is not None}
    return out


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    data.pop("sweep", None)
    return from_dict(data)


def dumps(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def set_path(data: dict, path: str, value) -> None:
    section, _, key = path.partition(".")
    if not key or section not in SECTIONS:
        raise ConfigError(f"sweep path {path!r} must look like section.key with section in {sorted(SECTIONS)}")
    data.setdefault(section, {})[key] = value


# -- sweeps -----------------------------------------------------------------------

@dataclass
class SweepSpec:
    base: ExperimentConfig
    axes: list  # [(path, [values])]
    max_parallel: int = 1
    cap: int = 256

    def __post_init__(self):
        if self.size > self.cap:
            raise ConfigError(f"sweep has {self.size} runs, above the cap {self.cap}")

    @property
    def size(self) -> int:
        n = 1
        for _, vals in self.axes:
            n *= len(vals)
        return n

    def expand(self) -> list:
        """``[(assignment dict, ExperimentConfig)]`` over the cartesian product."""
        base = to_dict(self.base)
        names = [p for p, _ in self.axes]
        runs = []
        for combo in itertools.product(*[v for _, v in self.axes]):
            data = copy.deepcopy(base)
            for path, val in zip(names, combo):
                set_path(data, path, val)
            runs.append((dict(zip(names, combo)), from_dict(data)))
        return runs


def loads_sweep(text: str) -> SweepSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"sweep file is not valid TOML: {exc}") from exc
    sw = data.pop("sweep", {})
    unknown = set(sw) - {"axis", "max_parallel", "cap"}
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [sweep]")
    axes = []
    for ax in sw.get("axis", []):
        if set(ax) != {"path", "values"}:
            raise ConfigError("each [[sweep.axis]] needs exactly path and values")
        axes.append((ax["path"], list(ax["values"])))
    return SweepSpec(from_dict(data), axes, int(sw.get("max_parallel", 1)), int(sw.get("cap", 256)))


def load_sweep(path) -> SweepSpec:
    with open(path, encoding="utf-8") as fh:
        return loads_sweep(fh.read())
