"""Accuracy metrics, the ka estimability window, and the noise-robustness sweep."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bank import FormFactorBank
from .estimator import (
    DEFAULT_RCOND,
    SizeDistributionEstimate,
    SuppressionPolicy,
    estimate_constrained,
    estimate_unconstrained,
    normalize_distribution,
)
from .phantom import GroundTruth, PhantomSpec, add_noise, synthesize_phantom, to_form_factor, unit_max

KA_LOW = 0.6
KA_HIGH = 1.2
PEAK_FRACTION = 0.1
METHODS = ("unconstrained", "constrained")


@dataclass(frozen=True)
class EstimableRange:
    size_min: float  # um
    size_max: float  # um
    ka_low: float = KA_LOW
    ka_high: float = KA_HIGH

    def contains(self, sizes) -> np.ndarray:
        sizes = np.asarray(sizes, dtype=float)
        return (sizes >= self.size_min) & (sizes <= self.size_max)


@dataclass(frozen=True)
class EvaluationReport:
    mae_full: float
    mae_in_range: float
    out_of_range_mass: float
    peak_errors: tuple  # um, one per true mode


def estimable_size_range(f_min: float, f_max: float, background_speed: float = 1.498) -> EstimableRange:
    """Sizes (um) with 0.6 <= ka <= 1.2 somewhere in [f_min, f_max] MHz.

    ``a`` here is the tabulated size itself, not half of it: a = ka * c / (2 pi f).
    """
    if not 0 < f_min <= f_max:
        raise ValueError(f"need 0 < f_min <= f_max (got {f_min}, {f_max})")
    if not background_speed > 0:
        raise ValueError("background_speed must be > 0")
    # mm/us divided by MHz is mm
    size_min = KA_LOW * background_speed / (2 * math.pi * f_max) * 1000.0
    size_max = KA_HIGH * background_speed / (2 * math.pi * f_min) * 1000.0
    return EstimableRange(size_min, size_max)


def find_modes(probabilities, sizes) -> list[float]:
    """Centres (um) of local maxima above 10% of the global maximum.

    A plateau of equal values counts as one mode at its midpoint.
    """
    p = np.asarray(probabilities, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    cut = PEAK_FRACTION * p.max()
    modes = []
    i = 0
    while i < p.size:
        j = i
        while j + 1 < p.size and p[j + 1] == p[i]:
            j += 1
        left_ok = i == 0 or p[i - 1] < p[i]
        right_ok = j == p.size - 1 or p[j + 1] < p[i]
        if left_ok and right_ok and p[i] > cut:
            modes.append(0.5 * (sizes[i] + sizes[j]))
        i = j + 1
    return modes


def mean_abs_error(p, q, mask=None) -> float:
    diff = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    if mask is not None:
        diff = diff[mask]
    return float(diff.mean()) if diff.size else 0.0


def evaluate(estimate, truth: GroundTruth, window: EstimableRange) -> EvaluationReport:
    """Compare estimated probabilities (or an estimate) with the ground truth."""
    if isinstance(estimate, SizeDistributionEstimate):
        est = normalize_distribution(estimate)
    else:
        est = np.asarray(estimate, dtype=float)
    true = np.asarray(truth.probabilities, dtype=float)
    if est.shape != true.shape:
        raise ValueError(f"estimate has {est.size} sizes, ground truth {true.size}")
    inside = window.contains(truth.sizes)
    est_modes = find_modes(est, truth.sizes)
    peak_errors = tuple(min(abs(m - e) for e in est_modes) for m in find_modes(true, truth.sizes))
    return EvaluationReport(
        mae_full=mean_abs_error(est, true),
        mae_in_range=mean_abs_error(est, true, inside),
        out_of_range_mass=float(est[~inside].sum()),
        peak_errors=peak_errors,
    )


@dataclass
class TrialResult:
    trial: int
    method: str
    mae_in_range: float = math.nan
    mae_full: float = math.nan
    out_of_range_mass: float = math.nan
    residual_l2: float = math.nan
    error: str | None = None


@dataclass
class SweepResult:
    variance: float
    seed: int
    trials: list[TrialResult] = field(default_factory=list)

    def summary(self) -> dict:
        out = {"variance": self.variance, "seed": self.seed, "trials": len({t.trial for t in self.trials})}
        for method in METHODS:
            rows = [t for t in self.trials if t.method == method]
            ok = np.array([t.mae_in_range for t in rows if t.error is None])
            out[method] = {
                "mae_in_range_mean": float(ok.mean()) if ok.size else math.nan,
                "mae_in_range_std": float(ok.std()) if ok.size else math.nan,
                "failures": sum(t.error is not None for t in rows),
            }
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("trial,method,mae_in_range,mae_full,out_of_range_mass,residual_l2\n")
            for t in sorted(self.trials, key=lambda r: (r.trial, METHODS.index(r.method))):
                fh.write(
                    f"{t.trial},{t.method},{t.mae_in_range:.17g},{t.mae_full:.17g},"
                    f"{t.out_of_range_mass:.17g},{t.residual_l2:.17g}\n"
                )

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def trial_seed(seed: int, trial: int) -> int:
    return seed ^ trial


def run_trial(bsc_unit, truth, bank, window, variance, seed, trial, policy, rcond) -> list[TrialResult]:
    """One noisy realization pushed through both estimators."""
    results = []
    try:
        noisy = add_noise(bsc_unit, variance, trial_seed(seed, trial))
        ft = to_form_factor(noisy)
    except (ValueError, ArithmeticError) as exc:
        return [TrialResult(trial, m, error=str(exc)) for m in METHODS]
    for method in METHODS:
        try:
            if method == "unconstrained":
                est = estimate_unconstrained(ft, bank, rcond)
            else:
                est = estimate_constrained(ft, bank, policy, rcond)
            rep = evaluate(est, truth, window)
            results.append(
                TrialResult(trial, method, rep.mae_in_range, rep.mae_full, rep.out_of_range_mass, est.residual_l2)
            )
        except (ValueError, ArithmeticError) as exc:
            results.append(TrialResult(trial, method, error=str(exc)))
    return results


def noise_sweep(
    phantom: PhantomSpec,
    bank: FormFactorBank,
    variance: float,
    trials: int,
    seed: int,
    policy: SuppressionPolicy = SuppressionPolicy(),
    rcond: float = DEFAULT_RCOND,
) -> SweepResult:
    """Repeat add-noise / estimate / evaluate with per-trial seeds ``seed ^ trial``."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1 (was {trials})")
    bsc, _, truth = synthesize_phantom(phantom, bank)
    window = estimable_size_range(bank.frequencies[0], bank.frequencies[-1], bank.materials.background_speed)
    result = SweepResult(variance, seed)
    for t in range(trials):
        result.trials.extend(run_trial(unit_max(bsc), truth, bank, window, variance, seed, t, policy, rcond))
    return result
