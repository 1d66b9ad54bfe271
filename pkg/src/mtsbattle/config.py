from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from pathlib import Path
from typing import Annotated, Any, Literal

import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from .errors import ConfigError, Diagnostic

logger = logging.getLogger(__name__)

_PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent


def _load_yaml(path: Path) -> dict[str, Any]:
    with open(path) as f:
        return yaml.safe_load(f) or {}


class Settings(BaseSettings):
    # Run registry
    registry_path: str = "data/runs.db"

    # Results
    output_dir: str = "results"
    jobs: int = 1

    log_level: str = "INFO"

    model_config = {"env_file": ".env", "env_prefix": "MTSBATTLE_", "extra": "ignore"}

    @classmethod
    def load(cls, env_file: str | Path = ".env", yaml_file: str | Path = "config.yaml") -> Settings:
        env_path = _PROJECT_ROOT / env_file
        yaml_path = _PROJECT_ROOT / yaml_file

        kwargs: dict[str, Any] = {}
        if env_path.exists():
            kwargs["_env_file"] = str(env_path)

        if yaml_path.exists():
            cfg = _load_yaml(yaml_path)
            runtime = cfg.get("runtime", {})
            for key in ("registry_path", "output_dir", "jobs", "log_level"):
                if key in runtime:
                    kwargs[key] = runtime[key]

        settings = cls(**kwargs)
        logger.info("Settings loaded (registry=%s, output=%s)", settings.registry_path, settings.output_dir)
        return settings


# ── physical quantities ──

_UNITS: dict[str, dict[str, float]] = {
    "length": {"mm": 1e-3, "cm": 1e-2, "m": 1.0, "km": 1e3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "level": {"dB": 1.0},
    "angle": {"deg": math.pi / 180.0, "rad": 1.0},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


def parse_quantity(value: Any, kind: str) -> float:
    """Parse ``"<number> <unit>"`` into SI units (radians for angles, dB for levels)."""
    units = _UNITS[kind]
    if isinstance(value, bool) or not isinstance(value, str):
        raise ValueError(f"expected a {kind} with a unit ({', '.join(units)}), got {value!r}")
    match = _QUANTITY.match(value)
    if not match or match.group(2) not in units:
        raise ValueError(f"cannot read {value!r} as a {kind}; use one of {', '.join(units)}")
    return float(match.group(1)) * units[match.group(2)]


def parse_vector(value: Any) -> tuple[float, float, float]:
    """Parse ``"x, y, z m"`` into metres."""
    if not isinstance(value, str):
        raise ValueError(f"expected a position like '1, 2, 0.5 m', got {value!r}")
    body, _, unit = value.strip().rpartition(" ")
    if unit not in _UNITS["length"]:
        raise ValueError(f"position {value!r} needs a length unit ({', '.join(_UNITS['length'])})")
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != 3:
        raise ValueError(f"position {value!r} needs three comma-separated coordinates")
    try:
        x, y, z = (float(p) * _UNITS["length"][unit] for p in parts)
    except ValueError:
        raise ValueError(f"position {value!r} has a non-numeric coordinate") from None
    return x, y, z


Length = Annotated[float, BeforeValidator(lambda v: parse_quantity(v, "length"))]
Frequency = Annotated[float, BeforeValidator(lambda v: parse_quantity(v, "frequency"))]
Level = Annotated[float, BeforeValidator(lambda v: parse_quantity(v, "level"))]
Angle = Annotated[float, BeforeValidator(lambda v: parse_quantity(v, "angle"))]
Vector = Annotated[tuple[float, float, float], BeforeValidator(parse_vector)]

ExperimentKind = Literal[
    "battle",
    "algorithm_matrix",
    "speed_matrix",
    "element_matrix",
    "frequency_sweep",
    "distance_sweep",
    "orientation_sweep",
    "coupling_test",
    "jamming",
    "protego",
    "irshield",
    "risiren",
]
OptimizerName = Literal["GD", "FL", "BF", "LR", "RD", "NO"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ── experiment sections ──


class GeometryConfig(_Section):
    frequency: Frequency = 5.5e9
    endpoints: dict[str, Vector]
    link: tuple[str, str] = ("alice", "bob")

    @model_validator(mode="after")
    def _link_known(self) -> GeometryConfig:
        missing = [name for name in self.link if name not in self.endpoints]
        if missing:
            raise ValueError(f"link endpoints not defined: {', '.join(missing)}")
        return self


class SurfaceConfigSection(_Section):
    anchor: str
    offset: Vector
    facing: str | None = None
    rotation: Angle = 0.0
    rows: int = Field(16, ge=0)
    cols: int = Field(16, ge=0)
    phase_bits: int = Field(1, ge=1, le=8)
    active_elements: int | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _active_fits(self) -> SurfaceConfigSection:
        if self.active_elements is not None and self.active_elements > self.rows * self.cols:
            raise ValueError(f"active_elements {self.active_elements} exceeds rows*cols = {self.rows * self.cols}")
        return self


class MotionConfig(_Section):
    ar_coefficient: float = Field(0.9, ge=0.0, lt=1.0)
    perturbation_std: float = Field(0.05, ge=0.0)
    affected_fraction: float = Field(0.2, ge=0.0, le=1.0)


class PropagationConfig(_Section):
    path_loss_exponent: float = Field(2.0, ge=1.5, le=4.0)
    rician_k: float = Field(5.0, ge=0.0)
    measurement_noise: Level | None = None
    coupling: bool = False
    coupling_gain: Level = 0.0
    element_gain: Level = 0.0
    scatter_scale: Level = 0.0
    direct_attenuation: Level = 0.0
    motion: MotionConfig = Field(default_factory=MotionConfig)

    @property
    def noise_variance(self) -> float:
        return 0.0 if self.measurement_noise is None else 10.0 ** (self.measurement_noise / 10.0)


class PartyConfig(_Section):
    optimizer: OptimizerName = "GD"
    sense: Literal["maximize", "minimize"] = "maximize"
    pause: int = Field(1, ge=1)
    evaluation: str = "power"
    window: int = Field(1, ge=1)
    params: dict[str, float | int] = Field(default_factory=dict)
    beam_directions: int = Field(16, ge=0)

    @field_validator("evaluation")
    @classmethod
    def _known_evaluation(cls, name: str) -> str:
        from . import scenarios  # noqa: F401  registers the spectrogram evaluators
        from .battle.engine import evaluation_names

        known = evaluation_names()
        if name not in known:
            raise ValueError(f"unknown evaluation {name!r}; choose one of {', '.join(known)}")
        return name


class ScheduleConfig(_Section):
    mode: Literal["independent", "reactive", "simultaneous"] = "simultaneous"
    total_steps: int = Field(2000, ge=1)
    baseline_trials: int = Field(1000, ge=1)


class SweepConfig(_Section):
    trials: int = Field(1, ge=1)
    kinds: list[OptimizerName] = Field(default_factory=list)
    pauses: list[Annotated[int, Field(ge=1)]] = Field(default_factory=list)
    counts: list[Annotated[int, Field(ge=0)]] = Field(default_factory=list)
    frequencies: list[Frequency] = Field(default_factory=list)
    distance_pairs: list[tuple[Length, Length]] = Field(default_factory=list)
    angles: list[Angle] = Field(default_factory=list)
    surface: Literal["A", "B"] = "B"
    ensemble: int = Field(10_000, ge=1)
    snr_length: int = Field(1000, ge=2)
    variation_trials: int = Field(1000, ge=2)


class GainGrid(_Section):
    start: Level = -20.0
    stop: Level = 80.0
    step: Level = 1.0

    @model_validator(mode="after")
    def _ordered(self) -> GainGrid:
        if not self.step > 0 or self.stop < self.start:
            raise ValueError("gain grid needs step > 0 and stop >= start")
        return self

    def grid(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(count)]


class JammingConfig(_Section):
    legit_link: tuple[str, str] = ("alice", "bob")
    jam_link: tuple[str, str] = ("eve", "bob")
    signal_power: Level = 0.0
    noise_power: Level = -90.0
    margin: Level = 16.0
    gains: GainGrid = Field(default_factory=GainGrid)
    packets: int = Field(200, ge=1)
    steps: int = Field(2000, ge=1)
    jitter_k: float = Field(10.0, ge=0.0)


class ProtegoConfig(_Section):
    transmitter: str = "alice"
    bob: str = "bob"
    eve: str = "eve"
    set_size: int = Field(4, ge=1)
    symbols: int = Field(10_000, ge=2)
    bob_steps: int = Field(3000, ge=1)
    search_steps: int = Field(3000, ge=1)
    attack_steps: int = Field(3000, ge=1)


class IrShieldConfig(_Section):
    transmitter: str = "alice"
    receiver: str = "eve"
    steps: int = Field(4000, ge=2)
    segment: int = Field(200, ge=1)
    window: int = Field(20, ge=2)
    redraw_period: int | None = Field(16, ge=1)
    invert_period: int = Field(4, ge=1)
    training_configs: int = Field(64, ge=2)
    attacker_steps: int = Field(2000, ge=1)
    defender_rotation: Angle = 0.0


class StftConfig(_Section):
    window: int = Field(64, ge=2)
    hop: int = Field(16, ge=1)
    nfft: int | None = None
    sample_rate: Frequency = 100.0


class TargetConfig(_Section):
    kind: Literal["doppler_ramp", "square_toggle", "file"]
    length: int = Field(600, ge=2)
    f_start: Frequency = 4.0
    f_end: Frequency = 8.0
    frequency: Frequency = 6.25
    path: str | None = None

    @model_validator(mode="after")
    def _file_has_path(self) -> TargetConfig:
        if self.kind == "file" and not self.path:
            raise ValueError("target kind 'file' needs a path to a CSV spectrogram")
        return self


class GaConfig(_Section):
    population: int = Field(64, ge=2)
    generations: int = Field(200, ge=0)
    crossover_rate: float = Field(0.7, ge=0.0, le=1.0)
    mutation_rate: float | None = Field(None, gt=0.0, le=1.0)
    elitism: int = Field(2, ge=0)
    tournament: int = Field(3, ge=1)


class RisirenConfig(_Section):
    transmitter: str = "alice"
    receiver: str = "bob"
    target: TargetConfig
    stft: StftConfig = Field(default_factory=StftConfig)
    ga: GaConfig = Field(default_factory=GaConfig)
    toggle_steps: int = Field(2000, ge=1)
    defense_steps: int = Field(1500, ge=1)
    defense_window: int = Field(64, ge=2)


_KIND_SECTIONS: dict[str, tuple[str, ...]] = {
    "algorithm_matrix": ("sweep.kinds",),
    "speed_matrix": ("sweep.pauses",),
    "element_matrix": ("sweep.counts",),
    "frequency_sweep": ("sweep.frequencies",),
    "distance_sweep": ("sweep.distance_pairs",),
    "orientation_sweep": ("sweep.angles",),
    "coupling_test": ("sweep.angles",),
    "jamming": ("jamming",),
    "protego": ("protego",),
    "irshield": ("irshield",),
    "risiren": ("risiren",),
}


class ExperimentConfig(_Section):
    kind: ExperimentKind
    seed: int = Field(ge=0)
    name: str | None = None
    output: str | None = None
    geometry: GeometryConfig
    surfaces: dict[Literal["A", "B"], SurfaceConfigSection] = Field(default_factory=dict)
    propagation: PropagationConfig = Field(default_factory=PropagationConfig)
    parties: dict[Literal["A", "B"], PartyConfig] = Field(default_factory=dict)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    sweep: SweepConfig | None = None
    jamming: JammingConfig | None = None
    protego: ProtegoConfig | None = None
    irshield: IrShieldConfig | None = None
    risiren: RisirenConfig | None = None

    @model_validator(mode="after")
    def _kind_sections(self) -> ExperimentConfig:
        problems: list[str] = []
        for path in _KIND_SECTIONS.get(self.kind, ()):
            head, _, tail = path.partition(".")
            section = getattr(self, head)
            if section is None or (tail and not getattr(section, tail)):
                problems.append(f"experiment kind {self.kind!r} requires {path}")
        endpoints = self.geometry.endpoints
        for sid, surface in self.surfaces.items():
            for ref in (surface.anchor, surface.facing):
                if ref is not None and ref not in endpoints:
                    problems.append(f"surfaces.{sid} refers to unknown endpoint {ref!r}")
        for name in self._referenced_endpoints():
            if name not in endpoints:
                problems.append(f"endpoint {name!r} is used but not defined in geometry.endpoints")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def _referenced_endpoints(self) -> list[str]:
        names: list[str] = []
        if self.kind == "jamming" and self.jamming:
            names += [*self.jamming.legit_link, *self.jamming.jam_link]
        if self.kind == "protego" and self.protego:
            names += [self.protego.transmitter, self.protego.bob, self.protego.eve]
        if self.kind == "irshield" and self.irshield:
            names += [self.irshield.transmitter, self.irshield.receiver]
        if self.kind == "risiren" and self.risiren:
            names += [self.risiren.transmitter, self.risiren.receiver]
        return names

    def party(self, party: str) -> PartyConfig:
        return self.parties.get(party) or PartyConfig(sense="maximize" if party == "A" else "minimize")

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the validated configuration."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


# ── loading with line diagnostics ──


def _node_line(root: yaml.Node | None, location: tuple[Any, ...]) -> int | None:
    """1-based line of the deepest YAML node matching a pydantic error location."""
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for key in location:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if getattr(k, "value", None) == str(key)), None)
            if match is None:
                key_node = next((k for k, _ in node.value if getattr(k, "value", None) == str(key)), None)
                return key_node.start_mark.line + 1 if key_node is not None else line
            node = match
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        line = node.start_mark.line + 1
    return line


def _diagnostics(error: ValidationError, root: yaml.Node | None) -> list[Diagnostic]:
    out = []
    for item in error.errors():
        # drop pydantic's validator-function markers from the path
        loc = tuple(p for p in item["loc"] if not (isinstance(p, str) and p.startswith("function-")))
        message = item["msg"].removeprefix("Value error, ")
        out.append(Diagnostic(location=".".join(str(p) for p in loc) or "<root>", line=_node_line(root, loc), message=message))
    return out


def load_experiment(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    """Read and validate an experiment file; every problem is reported at once."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([Diagnostic(location=str(path), line=None, message=f"cannot read file: {exc.strerror}")]) from exc
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            [Diagnostic(location=str(path), line=mark.line + 1 if mark else None, message=f"invalid YAML: {exc}")]
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError([Diagnostic(location=str(path), line=None, message="experiment file must be a mapping")])
    if seed is not None:
        data["seed"] = seed
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_diagnostics(exc, root)) from exc
    logger.info("Experiment config loaded (%s, kind=%s, seed=%d)", path, config.kind, config.seed)
    return config
