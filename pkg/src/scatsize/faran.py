"""Backscattering cross-section of a solid elastic sphere in a fluid.

Partial-wave solution after Faran (1951), in the phase-shift form given by
MacLennan (1981). Inputs use lab units (mm/us, g/cm^3, um, MHz) and are
converted to SI before any wavenumber is formed; the returned cross-section
is in m^2/sr.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bessel import MAX_ORDER, spherical_jn_all, spherical_yn_all

MM_PER_US = 1e3  # -> m/s
G_PER_CM3 = 1e3  # -> kg/m^3
UM = 1e-6  # -> m
MHZ = 1e6  # -> Hz

TERM_TOLERANCE = 1e-12
EXTRA_TERMS = 10


class ConvergenceError(ArithmeticError):
    """The partial-wave series did not settle within the supported order."""


@dataclass(frozen=True)
class AcousticMaterials:
    sphere_longitudinal_speed: float = 5.5719  # mm/us
    sphere_poisson_ratio: float = 0.21
    sphere_density: float = 2.38  # g/cm^3
    background_speed: float = 1.498  # mm/us
    background_density: float = 1.04  # g/cm^3

    def __post_init__(self):
        for name in ("sphere_longitudinal_speed", "background_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0 (was {getattr(self, name)})")
        for name in ("sphere_density", "background_density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0 (was {getattr(self, name)})")
        if not 0 < self.sphere_poisson_ratio < 0.5:
            raise ValueError(
                f"sphere_poisson_ratio must lie in (0, 0.5) (was {self.sphere_poisson_ratio})"
            )

    def to_dict(self) -> dict:
        return asdict(self)


# Glass beads in a water-based gel: the default material set.
GLASS_BEADS = AcousticMaterials()


@dataclass(frozen=True)
class ScatteringEvaluation:
    size: float  # um, as tabulated
    frequency: float  # MHz
    cross_section: float  # m^2/sr
    terms_used: int


def shear_speed(materials: AcousticMaterials) -> float:
    """Shear wave speed (mm/us) from the longitudinal speed and Poisson's ratio."""
    nu = materials.sphere_poisson_ratio
    return materials.sphere_longitudinal_speed * math.sqrt((1 - 2 * nu) / (2 - 2 * nu))


def physical_radius(size: float, size_is_radius: bool = False) -> float:
    """Radius in metres for a tabulated size in um.

    The size grid holds bead diameters, so the default halves it.
    """
    return size * UM if size_is_radius else 0.5 * size * UM


def _phase_terms(x: float, x1: float, x2: float, alpha: float, beta: float, nmax: int) -> np.ndarray:
    """Complex series terms (-1)^n (2n+1) sin(eta_n) exp(i eta_n) for n = 0..nmax.

    Derivatives enter only through ``z z_n'(z) = n z_n - z z_{n+1}`` and
    ``z^2 z_n''(z) = (n^2 - n - z^2) z_n + 2 z z_{n+1}``, which keeps every
    coefficient free of the O(1) cancellations that appear at small ka. Each
    Bessel family is scaled per order by max(|z_n|, |z_{n+1}|) so the
    coefficient products neither underflow nor overflow; only the j/y scale
    ratio is carried into tan(eta).
    """
    n = np.arange(nmax + 1, dtype=float)

    def pieces(values, z):
        lo, hi = values[: nmax + 1], values[1 : nmax + 2]
        scale = np.maximum(np.abs(lo), np.abs(hi))
        lo, hi = lo / scale, hi / scale
        return lo, n * lo - z * hi, (n * n - n - z * z) * lo + 2.0 * z * hi, hi, scale

    with np.errstate(over="ignore", invalid="ignore"):
        j, xjd, _, _, sj = pieces(spherical_jn_all(nmax + 1, x), x)
        y, xyd, _, _, sy = pieces(spherical_yn_all(nmax + 1, x), x)
    jl, xjld, xxjldd, jl_next, _ = pieces(spherical_jn_all(nmax + 1, x1), x1)
    js, xjsd, xxjsdd, _, _ = pieces(spherical_jn_all(nmax + 1, x2), x2)

    a2 = (n * n + n - 2.0) * js + xxjsdd
    # x1 j' - j in closed form
    a1 = 2.0 * n * (n + 1.0) * ((n - 1.0) * jl - x1 * jl_next)
    b2 = a2 * (beta * x1 * x1 * jl - alpha * xxjldd) - a1 * alpha * (js - xjsd)
    b1 = a2 * xjld - a1 * js  # MacLennan's B1 divided by ka

    num = b2 * xjd - x * x * b1 * j
    den = b2 * xyd - x * x * b1 * y

    terms = np.zeros(nmax + 1, dtype=complex)
    for order in range(nmax + 1):
        ratio = sj[order] / sy[order]
        if not np.isfinite(sy[order]) or ratio == 0.0 or num[order] == 0.0:
            # y_n overflowed or j_n/y_n underflowed: no phase shift at this precision
            continue
        if den[order] == 0.0:
            eta = 0.5 * math.pi
        else:
            # atan, not atan2: a result near -pi would round away tiny shifts
            eta = math.atan(-(num[order] / den[order]) * ratio)
        terms[order] = (-1) ** order * (2 * order + 1) * math.sin(eta) * cmath.exp(1j * eta)
    return terms


def backscatter_cross_section(
    size: float,
    frequency: float,
    materials: AcousticMaterials = GLASS_BEADS,
    truncation: int | None = None,
    size_is_radius: bool = False,
) -> ScatteringEvaluation:
    """Differential backscattering cross-section sigma_b (m^2/sr) at 180 degrees.

    ``size`` is the tabulated bead size in um; by default it is a diameter and
    the sphere radius is ``size / 2``. ``truncation`` fixes the highest series
    order; when omitted the series runs from ``ceil(ka) + 10`` terms until the
    last term is below 1e-12 of the partial sum.
    """
    if not size > 0:
        raise ValueError(f"size must be > 0 (was {size})")
    if not frequency > 0:
        raise ValueError(f"frequency must be > 0 (was {frequency})")

    c = materials.background_speed * MM_PER_US
    c_l = materials.sphere_longitudinal_speed * MM_PER_US
    c_s = shear_speed(materials) * MM_PER_US
    rho = materials.background_density * G_PER_CM3
    rho_s = materials.sphere_density * G_PER_CM3

    a = physical_radius(size, size_is_radius)
    k = 2.0 * math.pi * frequency * MHZ / c
    x = k * a
    x1 = x * c / c_l
    x2 = x * c / c_s
    alpha = 2.0 * (rho_s / rho) * (c_s / c) ** 2
    beta = (rho_s / rho) * (c_l / c) ** 2 - alpha

    if truncation is not None:
        if not 0 <= truncation <= MAX_ORDER - 1:
            raise ValueError(f"truncation must lie in 0..{MAX_ORDER - 1} (was {truncation})")
        terms = _phase_terms(x, x1, x2, alpha, beta, truncation)
        nmax = truncation
    else:
        nmax = None
        n0 = math.ceil(max(x, x1, x2)) + EXTRA_TERMS
        if n0 > MAX_ORDER - 1:
            raise ConvergenceError(f"ka too large for a {MAX_ORDER}-term series (size={size}, f={frequency})")
        block = n0
        while True:
            terms = _phase_terms(x, x1, x2, alpha, beta, block)
            partial = np.cumsum(terms)
            for n in range(n0, block + 1):
                if abs(terms[n]) < TERM_TOLERANCE * abs(partial[n]) or partial[n] == 0:
                    nmax = n
                    break
            if nmax is not None:
                terms = terms[: nmax + 1]
                break
            if block >= MAX_ORDER - 1:
                break
            block = min(2 * block, MAX_ORDER - 1)
        if nmax is None:
            raise ConvergenceError(
                f"series did not converge within {MAX_ORDER} terms (size={size}, f={frequency})"
            )

    total = terms.sum()
    sigma = abs(total) ** 2 / (k * k)
    return ScatteringEvaluation(size, frequency, float(sigma), nmax)
