"""Run configuration: one JSON document per run, every field optional."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .bank import SIZE_CONVENTIONS, linear_grid
from .estimator import DEFAULT_RCOND, SuppressionPolicy
from .faran import GLASS_BEADS, AcousticMaterials
from .phantom import DEFAULT_DISTRIBUTIONS, PhantomSpec, SizeDistributionSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    step: float

    def values(self, name: str = "grid") -> np.ndarray:
        return linear_grid(self.min, self.max, self.step, name)


@dataclass(frozen=True)
class NoiseSettings:
    variance: float = 1e-5  # relative to a unit-maximum BSC
    trials: int = 100
    seed: int = 0
    phantom: str = "bimodal"


@dataclass
class RunConfig:
    materials: AcousticMaterials = GLASS_BEADS
    sizes: GridSpec = GridSpec(1.0, 100.0, 1.0)  # um
    frequencies: GridSpec = GridSpec(3.0, 9.0, 0.1)  # MHz
    size_convention: str = "diameter"
    phantoms: list = field(default_factory=list)  # PhantomSpec; empty means the four defaults
    policy: SuppressionPolicy = SuppressionPolicy()
    rcond: float = DEFAULT_RCOND
    noise: NoiseSettings = NoiseSettings()
    out_dir: str = "out"
    workers: int = 1

    def size_grid(self) -> np.ndarray:
        return self.sizes.values("sizes")

    def frequency_grid(self) -> np.ndarray:
        return self.frequencies.values("frequencies")

    def phantom_specs(self) -> list[PhantomSpec]:
        if self.phantoms:
            return list(self.phantoms)
        return [PhantomSpec(d, materials=self.materials, name=n) for n, d in DEFAULT_DISTRIBUTIONS.items()]

    def phantom(self, name: str) -> PhantomSpec:
        for spec in self.phantom_specs():
            if spec.name == name:
                return spec
        raise ConfigError(f"no phantom named {name!r} in the configuration")

    def to_dict(self) -> dict:
        out = {
            "materials": self.materials.to_dict(),
            "sizes": asdict(self.sizes),
            "frequencies": asdict(self.frequencies),
            "size_convention": self.size_convention,
            "phantoms": [phantom_to_dict(p) for p in self.phantoms],
            "policy": {
                "mode": self.policy.mode,
                "theta": self.policy.threshold_fraction,
                "max_iterations": self.policy.max_iterations,
            },
            "rcond": self.rcond,
            "noise": asdict(self.noise),
            "out_dir": self.out_dir,
            "workers": self.workers,
        }
        return out


def phantom_to_dict(p: PhantomSpec) -> dict:
    return {
        "name": p.name,
        "kind": p.distribution.kind,
        "parameters": p.distribution.parameters,
        "fraction_semantics": p.distribution.fraction_semantics,
        "bead_mass_g": p.bead_mass,
        "volume_l": p.volume,
    }


def _take(doc: dict, allowed: set, where: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} field(s): {sorted(unknown)}")
    return doc


def config_from_dict(doc: dict) -> RunConfig:
    doc = _take(
        doc,
        {"materials", "sizes", "frequencies", "size_convention", "phantoms", "policy", "rcond", "noise",
         "out_dir", "workers"},
        "config",
    )
    try:
        materials = GLASS_BEADS
        if "materials" in doc:
            # missing fields fall back to the glass-bead defaults
            given = _take(doc["materials"], set(GLASS_BEADS.to_dict()), "materials")
            materials = AcousticMaterials(**{**GLASS_BEADS.to_dict(), **given})
        cfg = RunConfig(materials=materials)
        for key in ("sizes", "frequencies"):
            if key in doc:
                base = asdict(getattr(cfg, key))
                setattr(cfg, key, GridSpec(**{**base, **_take(doc[key], {"min", "max", "step"}, key)}))
        cfg.size_grid()
        cfg.frequency_grid()
        if "size_convention" in doc:
            if doc["size_convention"] not in SIZE_CONVENTIONS:
                raise ConfigError(f"size_convention must be one of {SIZE_CONVENTIONS}")
            cfg.size_convention = doc["size_convention"]
        if "policy" in doc:
            pol = _take(doc["policy"], {"mode", "theta", "max_iterations"}, "policy")
            cfg.policy = SuppressionPolicy(
                pol.get("mode", cfg.policy.mode).replace("-", "_"),
                float(pol.get("theta", cfg.policy.threshold_fraction)),
                int(pol.get("max_iterations", cfg.policy.max_iterations)),
            )
        if "rcond" in doc:
            cfg.rcond = float(doc["rcond"])
            if not 0 <= cfg.rcond < 1:
                raise ConfigError("rcond must lie in [0, 1)")
        if "noise" in doc:
            noise = _take(doc["noise"], {"variance", "trials", "seed", "phantom"}, "noise")
            cfg.noise = NoiseSettings(**{**asdict(cfg.noise), **noise})
            if cfg.noise.variance < 0 or cfg.noise.trials < 1 or cfg.noise.seed < 0:
                raise ConfigError("noise needs variance >= 0, trials >= 1 and seed >= 0")
        if "phantoms" in doc:
            cfg.phantoms = [_phantom(p, materials) for p in doc["phantoms"]]
            names = [p.name for p in cfg.phantoms]
            if len(set(names)) != len(names):
                raise ConfigError("phantom names must be unique")
        if "out_dir" in doc:
            cfg.out_dir = str(doc["out_dir"])
        if "workers" in doc:
            cfg.workers = int(doc["workers"])
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _phantom(doc: dict, materials: AcousticMaterials) -> PhantomSpec:
    doc = _take(doc, {"name", "kind", "parameters", "fraction_semantics", "bead_mass_g", "volume_l"}, "phantom")
    dist = SizeDistributionSpec(
        doc["kind"], dict(doc.get("parameters", {})), doc.get("fraction_semantics", "number_fraction")
    )
    return PhantomSpec(
        dist,
        bead_mass=float(doc.get("bead_mass_g", 200.0)),
        volume=float(doc.get("volume_l", 1.6)),
        materials=materials,
        name=str(doc.get("name", dist.kind)),
    )


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)
