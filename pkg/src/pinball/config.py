"""Experiment configuration loaded from TOML key/value files.

All keys are optional; defaults reproduce the desk-scale setup.  Values
are validated on construction so a bad config fails before any expensive
solve starts.
"""

try:
    import tomllib
except ModuleNotFoundError:                     # Python 3.10
    import tomli as tomllib

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import UsageError


@dataclass
class ExperimentConfig:
    mesh_path: str = ""          # empty selects the packaged desk mesh
    reynolds: float = 30.0
    dt: float = 0.01
    t_final: float = 100.0
    r: int = 20
    control_degree: int = 2
    care_tol: float = 1e-9
    irka_tol: float = 1e-4
    irka_max_iter: int = 100
    spinup_T: float = 200.0
    output_dir: str = "out"
    rng_seed: int = 0
    snapshot_stride: int = 0     # 0 disables VTK snapshots

    def __post_init__(self):
        for key in ("dt", "t_final", "care_tol", "irka_tol", "spinup_T"):
            if not getattr(self, key) > 0:
                raise UsageError(f"config: {key} must be positive")
        if self.reynolds <= 0:
            raise UsageError("config: reynolds must be positive")
        if self.control_degree not in (1, 2):
            raise UsageError("config: control_degree must be 1 or 2")
        if self.r < 2 or self.r % 2 != 0:
            raise UsageError("config: rom order r must be even and >= 2")
        if self.irka_max_iter < 1:
            raise UsageError("config: irka_max_iter must be >= 1")
        if self.snapshot_stride < 0:
            raise UsageError("config: snapshot_stride must be >= 0")


def load_config(path):
    """Parse a TOML config file into an ExperimentConfig."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}") from exc

    known = {f.name: f.type for f in fields(ExperimentConfig)}
    unknown = set(raw) - set(known)
    if unknown:
        raise UsageError(f"config file {path}: unknown keys "
                         f"{sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        want = known[key]
        if want is float and isinstance(value, int):
            value = float(value)
        if want is int and not isinstance(value, int):
            raise UsageError(f"config: {key} must be an integer")
        if want is float and not isinstance(value, float):
            raise UsageError(f"config: {key} must be a number")
        if want is str and not isinstance(value, str):
            raise UsageError(f"config: {key} must be a string")
        kwargs[key] = value
    return ExperimentConfig(**kwargs)
