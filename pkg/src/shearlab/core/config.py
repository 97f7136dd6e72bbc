"""Configuration management for ShearLab."""

from __future__ import annotations

import copy
import json
import logging
import shutil
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from enum import Enum
from itertools import zip_longest
from pathlib import Path
from typing import Any, Dict, List, Optional

from shearlab.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

CONFIG_DIR = Path.home() / ".config" / "shearlab"
DEFAULT_CONFIG_PATH = CONFIG_DIR / "config.json"

SECTIONS = ("grid", "profile", "multiplier", "simulation", "bootstrap", "sweep")


def _load_bundled_defaults() -> Dict[str, Any]:
    """Load the default config shipped with the package."""
    try:
        import importlib.resources as resources
        ref = resources.files("shearlab.data").joinpath("default_config.json")
        return json.loads(ref.read_text(encoding="utf-8"))
    except Exception:
        return {"metadata": {"version": "0.4", "auto_generated": True}, **{s: {} for s in SECTIONS}}


def _compare_versions(a: str, b: str) -> int:
    """Return 1 if a>b, -1 if a<b, 0 if equal."""
    va = [int(p) for p in a.split(".") if p.isdigit()]
    vb = [int(p) for p in b.split(".") if p.isdigit()]
    for x, y in zip_longest(va, vb, fillvalue=0):
        if x > y:
            return 1
        if x < y:
            return -1
    return 0


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of ``base`` with ``overrides`` applied section by section."""
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class ConfigStatus(Enum):
    LOADED = "loaded"
    CREATED = "created"
    ERROR = "error"
    UPDATED = "updated"


class _Section:
    """from_dict/to_dict for flat settings dataclasses; unknown keys are ignored."""

    @classmethod
    def from_dict(cls, raw: Optional[Dict[str, Any]]):
        raw = raw or {}
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for name, value in raw.items():
            if name not in known:
                logger.debug(f"Ignoring unknown {cls.__name__} key {name!r}")
                continue
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"invalid {cls.__name__}: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GridSettings(_Section):
    n_z: int = 8
    n_v: int = 128
    L_v: float = 8.0
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        self.n_z, self.n_v = int(self.n_z), int(self.n_v)
        self.L_v = float(self.L_v)

    def build(self):
        from shearlab.core.grid import Grid

        return Grid(self.n_z, self.n_v, self.L_v, float(self.dealias_fraction))


@dataclass
class ProfileSettings(_Section):
    spec: str = "tanh-bump:0.5,1"
    assumption_tolerance: float = 1e-6
    spectrum_tolerance: float = 1e-6
    k_max: int = 8


@dataclass
class MultiplierSettings(_Section):
    K: float = 32.0
    delta: float = 1.0 / 64.0
    s: float = 2.0
    l_sum: int = 128
    audit_points: int = 100_000
    seed: int = 0

    def build(self, nu: float):
        from shearlab.core.multipliers import MultiplierSpec

        return MultiplierSpec(nu, K=float(self.K), delta=float(self.delta), s=float(self.s), l_sum=int(self.l_sum))


@dataclass
class SimulationSettings(_Section):
    nu: float = 1e-3
    dt: float = 0.02
    t_end: float = 8.0
    epsilon_amp: float = 1e-3
    seed: int = 0
    split_mode: str = "monolithic"
    nonlinear: bool = True
    background: bool = True
    scheme: str = "ifab2"
    n_samples: int = 50
    budget: bool = True
    blowup_ratio: float = 1e6
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.split_mode not in ("monolithic", "split"):
            raise ValueError(f"split_mode must be monolithic or split, got {self.split_mode!r}")
        if self.scheme not in ("ifab2", "cnab2"):
            raise ValueError(f"scheme must be ifab2 or cnab2, got {self.scheme!r}")


@dataclass
class BootstrapSettings(_Section):
    short: float = 8.0
    C1: float = 4.0
    u1: float = 8.0
    low_regularity: float = 16.0
    c_star: float = 0.05

    def build(self):
        from shearlab.core.simulator import BootstrapThresholds

        return BootstrapThresholds(**self.to_dict())


@dataclass
class SweepSettings(_Section):
    nu_list: List[float] = field(default_factory=lambda: [1e-3, 10 ** -3.5, 1e-4])
    amplitude_low: float = 0.01
    amplitude_high: float = 100.0
    scan_points: int = 5
    bisection_steps: int = 8
    repetitions: int = 1
    profiles: List[str] = field(default_factory=lambda: ["couette"])
    t_end_factor: float = 5.0
    workers: int = 1
    output_dir: str = "sweep-out"


@dataclass
class Settings:
    """Typed view of every section of a configuration dictionary."""

    grid: GridSettings
    profile: ProfileSettings
    multiplier: MultiplierSettings
    simulation: SimulationSettings
    bootstrap: BootstrapSettings
    sweep: SweepSettings

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> Settings:
        return cls(
            grid=GridSettings.from_dict(raw.get("grid")),
            profile=ProfileSettings.from_dict(raw.get("profile")),
            multiplier=MultiplierSettings.from_dict(raw.get("multiplier")),
            simulation=SimulationSettings.from_dict(raw.get("simulation")),
            bootstrap=BootstrapSettings.from_dict(raw.get("bootstrap")),
            sweep=SweepSettings.from_dict(raw.get("sweep")),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name).to_dict() for name in SECTIONS}

    def simulation_config(self, **overrides):
        """SimulationConfig built from these settings; keyword overrides win."""
        from shearlab.core.profile import load_profile
        from shearlab.core.simulator import SimulationConfig

        sim = self.simulation.to_dict()
        sim.update(overrides)
        profile = sim.pop("profile", None)
        nu = float(sim.pop("nu"))
        if profile is None:
            profile = load_profile(self.profile.spec, self.grid.build(), nu)
        return SimulationConfig(
            profile=profile,
            s=self.multiplier.s,
            multiplier=self.multiplier.build(profile.nu),
            thresholds=self.bootstrap.build(),
            **sim,
        )


def load_run_file(path: Path, base: Dict[str, Any]) -> Settings:
    """Settings from a JSON run/plan file, missing keys filled from ``base``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path}: invalid JSON: {e}") from e
    except OSError as e:
        raise InvalidInputError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    return Settings.from_dict(deep_merge(base, raw))


class ConfigManager:
    """Loads, saves and validates ShearLab configuration; outdated files gain new default keys."""

    def __init__(self, config_path: Optional[Path] = None):
        self.config_path = config_path or DEFAULT_CONFIG_PATH
        self.config: Dict[str, Any] = {}
        self.status = ConfigStatus.ERROR
        self.error_message = ""
        self._defaults = _load_bundled_defaults()

    def load_config(self) -> bool:
        try:
            if self.config_path.exists():
                with open(self.config_path, "r", encoding="utf-8") as f:
                    self.config = json.load(f)
                if not self._validate():
                    self.status = ConfigStatus.ERROR
                    self.error_message = "Validation failed"
                    return False
                self.status = ConfigStatus.LOADED
                if self._outdated(self.config):
                    self._backup()
                    self.config = self.update_with_defaults(self.config)
                    self.save_config()
                    self.status = ConfigStatus.UPDATED
                return True
            else:
                self.config = copy.deepcopy(self._defaults)
                self.config_path.parent.mkdir(parents=True, exist_ok=True)
                if self.save_config():
                    self.status = ConfigStatus.CREATED
                    return True
                self.status = ConfigStatus.ERROR
                self.error_message = "Failed to write default config"
                return False
        except json.JSONDecodeError as e:
            self.status = ConfigStatus.ERROR
            self.error_message = f"Invalid JSON: {e}"
            return False
        except Exception as e:
            self.status = ConfigStatus.ERROR
            self.error_message = str(e)
            return False

    def save_config(self) -> bool:
        try:
            self.config.setdefault("metadata", {})["last_modified"] = datetime.now().isoformat()
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_path, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False)
            return True
        except Exception as e:
            logger.error(f"Error saving config: {e}")
            return False

    def settings(self) -> Settings:
        """Typed settings; sections missing from the file come from the bundled defaults."""
        return Settings.from_dict(deep_merge(self._defaults, self.config))

    def reset_to_defaults(self) -> bool:
        self.config = copy.deepcopy(self._defaults)
        return self.save_config()

    def get_config(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def get_default_config(self) -> Dict[str, Any]:
        return copy.deepcopy(self._defaults)

    def get_status_info(self) -> Dict[str, Any]:
        md = self.config.get("metadata", {})
        return {
            "status": self.status.value,
            "error_message": self.error_message,
            "version": md.get("version", "unknown"),
            "auto_generated": md.get("auto_generated", True),
            "last_updated": md.get("last_updated", ""),
            "last_modified": md.get("last_modified", ""),
            "sections_count": sum(1 for s in SECTIONS if isinstance(self.config.get(s), dict)),
        }

    def update_with_defaults(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Add sections and keys new in the bundled defaults without touching existing values."""
        updated = deep_merge(self._defaults, config)
        updated.setdefault("metadata", {})["version"] = self._defaults.get("metadata", {}).get("version", "0.4")
        return updated

    def _validate(self) -> bool:
        if "metadata" not in self.config or "version" not in self.config["metadata"]:
            return False
        for name in SECTIONS:
            if name in self.config and not isinstance(self.config[name], dict):
                return False
        return True

    def _outdated(self, config: Dict) -> bool:
        current = str(config.get("metadata", {}).get("version", "0"))
        target = str(self._defaults.get("metadata", {}).get("version", "0"))
        return _compare_versions(target, current) > 0

    def _backup(self) -> str:
        if not self.config_path.exists():
            return ""
        bp = self.config_path.parent / f"config_backup_{datetime.now():%Y%m%d_%H%M%S}.json"
        try:
            shutil.copy2(self.config_path, bp)
            return str(bp)
        except Exception:
            return ""

