"""Define the configuration of the studies and the loader of the config files.

Config files are flat text, one `section.key = value` per line. Lines starting
with `#` and blank lines are ignored, list values are comma separated and the
loss weights accept fractions such as `1/16`.
"""

import hashlib
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from .exceptions import ConfigError

log = logging.getLogger(__name__)

ProblemKind = Literal["darcy", "burgers", "cookie"]


class ConfigSection(BaseModel):
    """Base of the configuration sections, unknown keys are errors."""

    class Config:
        """Configure the pydantic model."""

        extra = "forbid"
        validate_assignment = True


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ProblemConfig(ConfigSection):
    """Select the full order model."""

    kind: ProblemKind = "darcy"


class MeshConfig(ConfigSection):
    """Define the resolution of the unit square mesh."""

    n_div: int = Field(30, ge=1)


class SnapshotConfig(ConfigSection):
    """Define how many snapshots to generate and how to split them."""

    count: int = Field(1000, ge=2)
    seed: int = Field(..., ge=0, lt=2**64)
    train_fraction: float = Field(0.9, gt=0, lt=1)


class RandomFieldConfig(ConfigSection):
    """Define the Karhunen-Loeve expansion of the Darcy log-permeability.

    Attributes:
        kl_modes: number of modes m to keep, all of them if unset.
        n_trunc: number of terms used by the sampler, all the kept modes if unset.
    """

    kl_modes: Optional[int] = Field(None, ge=1)
    n_trunc: Optional[int] = Field(None, ge=0)
    length_scale: float = Field(1.0, gt=0)
    mass_lumping: bool = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _truncation_fits(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        kl_modes, n_trunc = values.get("kl_modes"), values.get("n_trunc")
        if kl_modes is not None and n_trunc is not None and n_trunc > kl_modes:
            raise ValueError("n_trunc can't be larger than kl_modes")
        return values


class BurgersConfig(ConfigSection):
    """Define the Burgers grid, time stepping and initial condition series."""

    length: float = Field(5.0, gt=0)
    n_cells: int = Field(500, ge=2)
    dt: float = Field(0.01, gt=0)
    final_time: float = Field(2.0, gt=0)
    series_terms: int = Field(200, ge=1)


class CookieConfig(ConfigSection):
    """Define the cookie problem data and the widths of its autoencoders."""

    epsilon: float = Field(0.01, gt=0)
    boundary_value: float = 0.1
    disk_center_x: float = 0.5
    disk_center_y: float = 0.5
    disk_radius: float = Field(0.2, gt=0)
    widths: List[int] = Field(default_factory=lambda: [50, 100, 200])

    _split_widths = validator("widths", pre=True, allow_reuse=True)(_split_list)


class TrainConfig(ConfigSection):
    """Define the loss weights and the optimizer of a DL-ROM training.

    Attributes:
        alpha1: weight of the model misfit |u - Psi(phi(mu))|^2.
        alpha2: weight of the reconstruction |u - Psi(Psi'(u))|^2.
        alpha3: weight of the latent misfit |Psi'(u) - phi(mu)|^2.
        rel_first_term: replace the first term by the relative error.
    """

    alpha1: float = Field(1.0, ge=0)
    alpha2: float = Field(1.0, ge=0)
    alpha3: float = Field(1.0, ge=0)
    rel_first_term: bool = False
    epochs: int = Field(300, ge=1)
    lr: float = Field(1e-3, ge=0)
    batch_size: int = Field(32, ge=1)
    seed: int = Field(0, ge=0)
    weight_decay: float = Field(0.0, ge=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)

    @validator("alpha1", "alpha2", "alpha3", pre=True)
    @classmethod
    def _parse_fraction(cls, value: Any) -> Any:
        if isinstance(value, str) and "/" in value:
            return float(Fraction(value.strip()))
        return value

    @root_validator(skip_on_failure=True)
    @classmethod
    def _some_weight(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if not any(values[name] > 0 for name in ("alpha1", "alpha2", "alpha3")):
            raise ValueError("at least one of the loss weights must be positive")
        return values


class SweepConfig(ConfigSection):
    """Define the latent dimensions of the error decay study.

    Attributes:
        pod_reference_dims: extra POD sizes evaluated without training an
            autoencoder, to compare the sweep against large linear bases.
    """

    latent_dims: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    pod_reference_dims: List[int] = Field(default_factory=list)

    _split_dims = validator("latent_dims", pre=True, allow_reuse=True)(_split_list)
    _split_references = validator("pod_reference_dims", pre=True, allow_reuse=True)(
        _split_list
    )

    @validator("latent_dims")
    @classmethod
    def _ascending(cls, latent_dims: List[int]) -> List[int]:
        if not latent_dims:
            raise ValueError("the sweep needs at least one latent dimension")
        if any(dim < 1 for dim in latent_dims):
            raise ValueError("latent dimensions must be positive")
        if any(second <= first for first, second in zip(latent_dims, latent_dims[1:])):
            raise ValueError("latent dimensions must be strictly ascending")
        return latent_dims

    @validator("pod_reference_dims")
    @classmethod
    def _positive(cls, dims: List[int]) -> List[int]:
        if any(dim < 1 for dim in dims):
            raise ValueError("POD reference sizes must be positive")
        return sorted(set(dims))


class Table1Config(ConfigSection):
    """Define the latent dimension of the full DL-ROM comparison."""

    latent_dim: int = Field(16, ge=1)


class OutputConfig(ConfigSection):
    """Define where the artifacts are written."""

    directory: str = "results"


class StudyConfig(ConfigSection):
    """Gather the configuration of a whole study."""

    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    snapshots: SnapshotConfig
    random_field: RandomFieldConfig = Field(default_factory=RandomFieldConfig)
    burgers: BurgersConfig = Field(default_factory=BurgersConfig)
    cookie: CookieConfig = Field(default_factory=CookieConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    table1: Table1Config = Field(default_factory=Table1Config)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def flat(self, exclude_output: bool = False) -> Dict[str, Any]:
        """Return the configuration as a dotted key dictionary."""
        exclude = {"output"} if exclude_output else set()
        return {
            f"{section}.{key}": value
            for section, fields in self.dict(exclude=exclude).items()
            for key, value in fields.items()
        }

    def config_digest(self) -> bytes:
        """Return the sha256 of every field that influences the numerical results."""
        canonical = "\n".join(
            f"{key}={_canonical(value)}"
            for key, value in sorted(self.flat(exclude_output=True).items())
        )
        return hashlib.sha256(canonical.encode("utf-8")).digest()

    def config_hash(self) -> str:
        """Return the hexadecimal config digest."""
        return self.config_digest().hex()

    def with_overrides(
        self, seed: Optional[int] = None, directory: Optional[str] = None
    ) -> "StudyConfig":
        """Return a copy with the command line overrides applied.

        Raises:
            ConfigError: if an override is not valid.
        """
        data = self.dict()
        if seed is not None:
            data["snapshots"]["seed"] = seed
        if directory is not None:
            data["output"]["directory"] = directory
        return build_config(data)


def _canonical(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_canonical(item) for item in value)
    return str(value)


def _error_fields(error: ValidationError) -> List[str]:
    return [".".join(str(part) for part in entry["loc"]) for entry in error.errors()]


def build_config(data: Dict[str, Any]) -> StudyConfig:
    """Validate a nested configuration dictionary.

    Raises:
        ConfigError: with the dotted names of the wrong fields.
    """
    try:
        return StudyConfig.parse_obj(data)
    except ValidationError as error:
        fields = _error_fields(error)
        raise ConfigError(
            f"Invalid configuration in {', '.join(fields)}: {error}", fields=fields
        ) from error


def parse_config_text(text: str) -> Dict[str, Dict[str, Union[str, List[str]]]]:
    """Parse the flat `section.key = value` lines into a nested dictionary.

    Raises:
        ConfigError: if a line is malformed or a key is repeated.
    """
    data: Dict[str, Dict[str, Any]] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key = key.strip()
        if not separator or key.count(".") != 1:
            raise ConfigError(
                f"Line {number}: expected `section.key = value`, got {raw_line!r}",
                fields=[key],
            )
        section, name = key.split(".")
        if name in data.setdefault(section, {}):
            raise ConfigError(f"Line {number}: repeated key {key}", fields=[key])
        data[section][name] = value.strip()
    return data


def load_config(path: Union[str, Path]) -> StudyConfig:
    """Read and validate a study configuration file.

    Raises:
        ConfigError: if the file can't be read or is not valid.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"Can't read the configuration file {path}: {error}") from error
    config = build_config(parse_config_text(text))
    log.debug(f"Loaded configuration {path} with hash {config.config_hash()}")
    return config
