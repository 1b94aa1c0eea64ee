"""System configuration: dataclass, TOML loading with an `extends` chain.

The checked-in `configs/paper.toml` holds the reference large-scale setup;
`configs/desk.toml` extends it with desk-scale overrides. Field names in the
TOML files match the dataclass attributes one-to-one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ImportError:
    import tomli as tomllib

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass
class SystemConfig:
    # population / resources
    users: int = 20                 # I
    n_max: int = 10                 # max users served per slot
    n_rf: int = 10                  # RF chains (n_max <= n_rf)
    power_w: float = 2.0            # P, total transmit power
    noise_w: float = 1e-15          # per-user noise variance sigma_i^2
    carrier_hz: float = 28e9        # f_c
    ema_delta: float = 0.1          # EMA weight for cumulative rates

    # BS array (uniform planar array)
    n_x: int = 8                    # horizontal elements
    n_y: int = 2                    # vertical elements
    spacing_wavelengths: float = 0.5
    downtilt_deg: float = 10.0
    bs_height_m: float = 7.0

    # deployment
    cell_radius_m: float = 100.0
    user_height_m: float = 1.5
    speed_kmh: float = 4.0

    # grid-of-beams codebook
    n_az: int = 32
    n_el: int = 8
    az_range_deg: tuple[float, float] = (-180.0, 180.0)
    el_range_deg: tuple[float, float] = (-30.0, 30.0)

    # clustered channel model
    clusters: int = 3
    subpaths: int = 5
    angular_spread_deg: float = 5.0
    cluster_scatter_deg: float = 60.0       # cluster azimuth scatter about the user
    cluster_elev_scatter_deg: float = 20.0  # cluster elevation scatter
    cluster_decay_db: float = 3.0           # mean power drop per cluster index
    pathloss_exponent: float = 2.9
    pathloss_intercept_db: float = 72.0     # 1 m intercept, 28 GHz urban NLOS
    shadowing_std_db: float = 8.7           # lognormal shadow fading (0 = off)
    gain_evolution: bool = True
    block_duration_s: float = 1e-3       # short-time block length

    # timing structure
    n_s: int = 40                   # short blocks per long block
    steps: int = 120                # T, short blocks per episode

    # experiment scale
    episodes: int = 200             # N_e for simulation runs
    train_episodes: int = 500       # N_e for dataset generation
    seed: int = 0

    # schedulers
    exhaustive_cap: float = 2e6

    # ML selector
    hidden1: int = 500
    hidden2: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 50
    input_mode: str = "W+C(W)"
    val_fraction: float = 0.05

    @property
    def n_bs(self) -> int:
        return self.n_x * self.n_y

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def speed_mps(self) -> float:
        return self.speed_kmh / 3.6

    def validate(self) -> "SystemConfig":
        if self.users < 1:
            raise ConfigurationError("users must be >= 1")
        if self.cell_radius_m <= 0:
            raise ConfigurationError("cell_radius_m must be > 0")
        if self.n_x < 1 or self.n_y < 1:
            raise ConfigurationError("array dimensions must be >= 1")
        if self.spacing_wavelengths <= 0:
            raise ConfigurationError("spacing_wavelengths must be > 0")
        if self.n_max < 1 or self.n_max > self.n_rf:
            raise ConfigurationError("need 1 <= n_max <= n_rf")
        if not (0.0 <= self.ema_delta <= 1.0):
            raise ConfigurationError("ema_delta must be in [0, 1]")
        if self.power_w <= 0 or self.noise_w <= 0:
            raise ConfigurationError("power_w and noise_w must be > 0")
        if self.n_az < 1 or self.n_el < 1:
            raise ConfigurationError("codebook grid must be >= 1x1")
        if self.clusters < 1 or self.subpaths < 1:
            raise ConfigurationError("clusters and subpaths must be >= 1")
        if self.n_s < 1 or self.steps < 1:
            raise ConfigurationError("n_s and steps must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["az_range_deg"] = list(d["az_range_deg"])
        d["el_range_deg"] = list(d["el_range_deg"])
        return d

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FIELD_NAMES = {f.name for f in fields(SystemConfig)}


def _from_dict(data: dict) -> SystemConfig:
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "az_range_deg" in data:
        data["az_range_deg"] = tuple(data["az_range_deg"])
    if "el_range_deg" in data:
        data["el_range_deg"] = tuple(data["el_range_deg"])
    return SystemConfig(**data).validate()


def _read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"bad TOML in {path}: {exc}") from None


def _resolve_extends(name: str, relative_to: Path) -> Path:
    candidate = relative_to / name
    if candidate.exists():
        return candidate
    builtin = resources.files("beamsched").joinpath("configs", name)
    if builtin.is_file():
        return Path(str(builtin))
    raise ConfigurationError(f"extends target not found: {name}")


def load_config(path: str | Path, _depth: int = 0) -> SystemConfig:
    """Load a TOML config, following `extends = "base.toml"` chains.

    `extends` is resolved first against the file's own directory, then
    against the packaged configs (so `extends = "paper.toml"` always works).
    """
    if _depth > 8:
        raise ConfigurationError("extends chain too deep (cycle?)")
    path = Path(path)
    data = _read_toml(path)
    base_name = data.pop("extends", None)
    if base_name is None:
        return _from_dict(data)
    base = load_config(_resolve_extends(base_name, path.parent), _depth + 1)
    merged = base.to_dict()
    merged.update(data)
    return _from_dict(merged)


def paper_config() -> SystemConfig:
    """The reference configuration shipped with the package."""
    builtin = resources.files("beamsched").joinpath("configs", "paper.toml")
    return load_config(Path(str(builtin)))
