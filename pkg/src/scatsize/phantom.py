"""Synthetic glass-bead phantoms: ground-truth size distributions and their spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bank import FormFactorBank, check_grid
from .faran import GLASS_BEADS, AcousticMaterials

KINDS = ("unimodal_gaussian", "uniform", "bimodal_gaussian_mixture", "point_mass", "explicit")
FRACTIONS = ("number_fraction", "mass_fraction")

# Counter-based generator; each (seed, trial) key gives an independent stream.
RNG_ALGORITHM = "numpy.random.Philox(4x64)/Generator.standard_normal"

UM_TO_CM = 1e-4
M2_TO_CM2 = 1e4


class EmptySupportError(ValueError):
    """The distribution puts no mass on the size grid."""


class MaterialMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SizeDistributionSpec:
    """Parametric size distribution; sizes in um.

    ``parameters`` per kind:
      unimodal_gaussian        {"mean", "std"}
      uniform                  {"low", "high"}
      bimodal_gaussian_mixture {"modes": [{"mean", "std", "weight"}, ...]}
      point_mass               {"size"}
      explicit                 {"probabilities": one value per grid size}
    """

    kind: str
    parameters: dict = field(default_factory=dict)
    fraction_semantics: str = "number_fraction"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        if self.fraction_semantics not in FRACTIONS:
            raise ValueError(f"fraction_semantics must be one of {FRACTIONS}")

    @classmethod
    def gaussian(cls, mean, std, **kw):
        return cls("unimodal_gaussian", {"mean": mean, "std": std}, **kw)

    @classmethod
    def uniform(cls, low, high, **kw):
        return cls("uniform", {"low": low, "high": high}, **kw)

    @classmethod
    def bimodal(cls, modes, **kw):
        return cls(
            "bimodal_gaussian_mixture",
            {"modes": [{"mean": m, "std": s, "weight": w} for m, s, w in modes]},
            **kw,
        )

    @classmethod
    def point_mass(cls, size, **kw):
        return cls("point_mass", {"size": size}, **kw)

    @classmethod
    def explicit(cls, probabilities, **kw):
        return cls("explicit", {"probabilities": list(probabilities)}, **kw)


@dataclass(frozen=True)
class PhantomSpec:
    distribution: SizeDistributionSpec
    bead_mass: float = 200.0  # g
    volume: float = 1.6  # L
    materials: AcousticMaterials = GLASS_BEADS
    name: str = "phantom"

    def __post_init__(self):
        if not self.bead_mass > 0:
            raise ValueError(f"bead_mass must be > 0 (was {self.bead_mass})")
        if not self.volume > 0:
            raise ValueError(f"volume must be > 0 (was {self.volume})")


# Four default validation distributions, all inside the estimable band.
DEFAULT_DISTRIBUTIONS = {
    "unimodal_narrow": SizeDistributionSpec.gaussian(40.0, 5.0),
    "unimodal_broad": SizeDistributionSpec.gaussian(60.0, 10.0),
    "uniform": SizeDistributionSpec.uniform(25.0, 75.0),
    "bimodal": SizeDistributionSpec.bimodal([(30.0, 4.0, 0.5), (70.0, 4.0, 0.5)]),
}


def default_phantoms(materials: AcousticMaterials = GLASS_BEADS) -> list[PhantomSpec]:
    return [PhantomSpec(dist, materials=materials, name=name) for name, dist in DEFAULT_DISTRIBUTIONS.items()]


@dataclass(frozen=True, eq=False)
class SpectrumVector:
    frequencies: np.ndarray  # MHz
    values: np.ndarray
    kind: str  # "bsc" or "form_factor"
    scale: float = 1.0  # divisor applied to reach these values

    def __post_init__(self):
        freqs = check_grid(self.frequencies, "frequencies")
        values = np.asarray(self.values, dtype=float)
        if values.shape != freqs.shape:
            raise ValueError(f"{values.size} values for {freqs.size} frequencies")
        if self.kind not in ("bsc", "form_factor"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    sizes: np.ndarray
    number_densities: np.ndarray  # beads per cm^3 per size
    counts: np.ndarray  # beads per size in the whole phantom
    weights: np.ndarray  # exact A with A @ F = F_T
    probabilities: np.ndarray


def _gauss_pdf(x, mean, std):
    if not std > 0:
        raise ValueError(f"std must be > 0 (was {std})")
    return np.exp(-0.5 * ((x - mean) / std) ** 2) / (std * math.sqrt(2 * math.pi))


def discretize_distribution(spec: SizeDistributionSpec, sizes) -> np.ndarray:
    """Per-size probabilities: the density sampled at each grid size, normalized to 1."""
    sizes = check_grid(sizes, "sizes")
    p = spec.parameters
    if spec.kind == "unimodal_gaussian":
        density = _gauss_pdf(sizes, p["mean"], p["std"])
    elif spec.kind == "bimodal_gaussian_mixture":
        density = np.zeros_like(sizes)
        for mode in p["modes"]:
            if mode["weight"] < 0:
                raise ValueError("mixture weights must be >= 0")
            density = density + mode["weight"] * _gauss_pdf(sizes, mode["mean"], mode["std"])
    elif spec.kind == "uniform":
        if not p["low"] <= p["high"]:
            raise ValueError("uniform distribution needs low <= high")
        density = ((sizes >= p["low"]) & (sizes <= p["high"])).astype(float)
    elif spec.kind == "point_mass":
        size = p["size"]
        if not sizes[0] - _half_step(sizes, 0) <= size <= sizes[-1] + _half_step(sizes, -1):
            raise EmptySupportError(f"point mass at {size} um lies outside the size grid")
        density = np.zeros_like(sizes)
        density[int(np.argmin(np.abs(sizes - size)))] = 1.0
    else:
        density = np.asarray(p["probabilities"], dtype=float)
        if density.shape != sizes.shape:
            raise ValueError(f"{density.size} explicit probabilities for {sizes.size} grid sizes")
        if np.any(density < 0):
            raise ValueError("explicit probabilities must be >= 0")
    total = density.sum()
    if not total > 0:
        raise EmptySupportError(f"{spec.kind} distribution has no mass on the size grid")
    return density / total


def _half_step(sizes, i):
    if sizes.size == 1:
        return 0.5 * sizes[0]
    return 0.5 * (sizes[1] - sizes[0]) if i == 0 else 0.5 * (sizes[-1] - sizes[-2])


def bead_volumes_cm3(bank: FormFactorBank) -> np.ndarray:
    diameters = bank.sizes * (2.0 if bank.size_convention == "radius" else 1.0) * UM_TO_CM
    return math.pi / 6.0 * diameters**3


def to_form_factor(bsc: SpectrumVector) -> SpectrumVector:
    """Divide a BSC by f^4 and max-normalize; the divisor is kept in ``scale``.

    The stored scale undoes the unit conversions of ``synthesize_phantom`` so
    that it is directly comparable with the bank's row scales.
    """
    if bsc.kind != "bsc":
        raise ValueError("expected a bsc spectrum")
    reduced = bsc.values / bsc.frequencies**4
    peak = reduced.max()
    if not peak > 0:
        raise ValueError("spectrum has no positive value to normalize by")
    return SpectrumVector(bsc.frequencies, reduced / peak, "form_factor", peak * bsc.scale / M2_TO_CM2)


def synthesize_phantom(phantom: PhantomSpec, bank: FormFactorBank):
    """Total BSC (1/(cm sr)), total form factor and ground truth for a phantom.

    Returns ``(bsc, form_factor, truth)``. The form factor's ``scale`` is the
    normalization constant s_T, so ``truth.weights @ bank.matrix`` equals the
    form factor values.
    """
    if phantom.materials != bank.materials:
        raise MaterialMismatchError("phantom materials differ from the materials the bank was built with")
    probs = discretize_distribution(phantom.distribution, bank.sizes)
    bead_mass = phantom.materials.sphere_density * bead_volumes_cm3(bank)  # g per bead
    if phantom.distribution.fraction_semantics == "number_fraction":
        counts = probs * (phantom.bead_mass / np.dot(probs, bead_mass))
    else:
        counts = probs * phantom.bead_mass / bead_mass
    densities = counts / (phantom.volume * 1000.0)

    # sum_i n_i sigma_i / f^4, in cm^-3 (m^2/sr) / MHz^4
    reduced = densities @ (bank.matrix * bank.row_scales[:, None])
    s_total = reduced.max()
    form_factor = SpectrumVector(bank.frequencies, reduced / s_total, "form_factor", s_total)
    bsc = SpectrumVector(bank.frequencies, reduced * bank.frequencies**4 * M2_TO_CM2, "bsc")
    weights = densities * bank.row_scales / s_total
    truth = GroundTruth(bank.sizes.copy(), densities, counts, weights, weights / weights.sum())
    return bsc, form_factor, truth


def unit_max(bsc: SpectrumVector) -> SpectrumVector:
    """Rescale a BSC to unit maximum, the reference scale for noise variances."""
    if bsc.kind != "bsc":
        raise ValueError("expected a bsc spectrum")
    peak = bsc.values.max()
    if not peak > 0:
        raise ValueError("spectrum has no positive value to normalize by")
    return SpectrumVector(bsc.frequencies, bsc.values / peak, "bsc", bsc.scale * peak)


def make_rng(seed: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be >= 0 (was {seed})")
    return np.random.Generator(np.random.Philox(key=seed))


def add_noise(spectrum: SpectrumVector, variance: float, seed: int) -> SpectrumVector:
    """Add iid N(0, variance) to each value.

    Intended for a BSC already scaled to unit maximum (see ``unit_max``).
    Values pushed below zero are kept as they are.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0 (was {variance})")
    if variance == 0:
        return SpectrumVector(spectrum.frequencies, spectrum.values.copy(), spectrum.kind, spectrum.scale)
    noise = make_rng(seed).standard_normal(spectrum.values.size) * math.sqrt(variance)
    return SpectrumVector(spectrum.frequencies, spectrum.values + noise, spectrum.kind, spectrum.scale)
