"""Recover the size-contribution vector A from F_T = A @ F.

``estimate_unconstrained`` is the minimum-norm least-squares solution through
an SVD pseudo-inverse. ``estimate_constrained`` zeroes the sizes whose weights
are negative or below a fraction of the peak and re-solves on the remaining
bank rows, repeating until the suppressed set stops growing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .bank import FormFactorBank
from .phantom import SpectrumVector

DEFAULT_RCOND = 1e-12
MODES = ("threshold", "contiguous_run")


class GridMismatchError(ValueError):
    pass


class FullSuppressionError(ArithmeticError):
    """Every size was suppressed, leaving nothing to fit."""


class DegenerateEstimateError(ArithmeticError):
    """No positive weight to turn into a probability."""


@dataclass(frozen=True)
class SuppressionPolicy:
    mode: str = "threshold"
    threshold_fraction: float = 0.05
    # iterate to a fixed point; use 1 for a single suppress-and-re-solve pass,
    # which keeps smooth distributions smoother on ill-conditioned banks
    max_iterations: int = 50

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES} (was {self.mode!r})")
        if not 0 <= self.threshold_fraction < 1:
            raise ValueError(f"threshold_fraction must lie in [0, 1) (was {self.threshold_fraction})")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1 (was {self.max_iterations})")


@dataclass(frozen=True, eq=False)
class SizeDistributionEstimate:
    weights: np.ndarray
    suppressed: frozenset
    residual_l2: float
    method: str  # "unconstrained" or "constrained"
    rcond: float = DEFAULT_RCOND
    iterations: int = 0
    converged: bool = True
    policy: SuppressionPolicy | None = None

    @property
    def probabilities(self) -> np.ndarray:
        return normalize_distribution(self)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "policy": asdict(self.policy) if self.policy else None,
            "residual_l2": float(self.residual_l2),
            "rcond": self.rcond,
            "iterations": self.iterations,
            "converged": self.converged,
            "suppressed_count": len(self.suppressed),
        }


def min_norm_solve(matrix: np.ndarray, target: np.ndarray, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Row vector ``a`` minimizing ||a @ matrix - target||, of least norm among minimizers.

    Singular values below ``rcond * s_max`` are discarded.
    """
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(matrix.shape[0])
    keep = s > rcond * s[0]
    # a = target @ pinv(matrix) = ((target @ vt.T) / s) @ u.T
    coeffs = (target @ vt[keep].T) / s[keep]
    return coeffs @ u[:, keep].T


def _check_inputs(ft: SpectrumVector, bank: FormFactorBank) -> None:
    if ft.kind != "form_factor":
        raise ValueError("estimators take a form_factor spectrum")
    if not np.array_equal(ft.frequencies, bank.frequencies):
        raise GridMismatchError("spectrum frequencies do not match the bank's frequency grid")
    if not np.any(bank.matrix):
        raise ValueError("bank matrix is identically zero")


def _residual(weights, bank, ft) -> float:
    return float(np.linalg.norm(weights @ bank.matrix - ft.values))


def estimate_unconstrained(ft: SpectrumVector, bank: FormFactorBank, rcond: float = DEFAULT_RCOND):
    _check_inputs(ft, bank)
    weights = min_norm_solve(bank.matrix, ft.values, rcond)
    return SizeDistributionEstimate(weights, frozenset(), _residual(weights, bank, ft), "unconstrained", rcond)


def select_suppression(weights, policy: SuppressionPolicy) -> frozenset:
    """Indices (0-based) to zero out before re-solving.

    Negative entries are always included. In threshold mode every entry below
    ``threshold_fraction * max(weights)`` joins them; in contiguous_run mode
    only the run of consecutive below-threshold entries with the largest total
    absolute step between neighbours does (earliest run on ties).
    """
    a = np.asarray(weights, dtype=float)
    if a.size == 0:
        raise ValueError("weights must be non-empty")
    cut = policy.threshold_fraction * a.max()
    below = a < cut
    chosen = set(np.flatnonzero(a < 0).tolist())
    if policy.mode == "threshold":
        chosen.update(np.flatnonzero(below).tolist())
    else:
        best, best_score = None, -1.0
        i = 0
        while i < a.size:
            if not below[i]:
                i += 1
                continue
            start = i
            while i < a.size and below[i]:
                i += 1
            score = float(np.abs(np.diff(a[start:i])).sum())
            if score > best_score:
                best, best_score = (start, i), score
        if best is not None:
            chosen.update(range(*best))
    if len(chosen) == a.size:
        raise FullSuppressionError("suppression would remove every size from the bank")
    return frozenset(chosen)


def solve_with_suppression(ft: SpectrumVector, bank: FormFactorBank, suppressed, rcond: float = DEFAULT_RCOND):
    """Min-norm solve on the rows of ``bank`` outside ``suppressed``; zeros elsewhere."""
    keep = np.ones(bank.shape[0], dtype=bool)
    keep[list(suppressed)] = False
    if not keep.any():
        raise FullSuppressionError("suppression would remove every size from the bank")
    weights = np.zeros(bank.shape[0])
    weights[keep] = min_norm_solve(bank.matrix[keep], ft.values, rcond)
    return weights


def estimate_constrained(
    ft: SpectrumVector,
    bank: FormFactorBank,
    policy: SuppressionPolicy = SuppressionPolicy(),
    rcond: float = DEFAULT_RCOND,
) -> SizeDistributionEstimate:
    """Suppress-and-re-solve until the suppressed set is stable.

    Suppressed sizes accumulate over passes. Stops after ``policy.max_iterations`` re-solves; the last iterate is
    returned with ``converged=False`` in that case.
    """
    first = estimate_unconstrained(ft, bank, rcond)
    weights = first.weights
    suppressed: frozenset = frozenset()
    iterations = 0
    converged = False
    while True:
        new = select_suppression(weights, policy) - suppressed
        if not new:
            converged = True
            break
        if iterations == policy.max_iterations:
            break
        suppressed = suppressed | new
        weights = solve_with_suppression(ft, bank, suppressed, rcond)
        iterations += 1
    return SizeDistributionEstimate(
        weights, suppressed, _residual(weights, bank, ft), "constrained", rcond, iterations, converged, policy
    )


def normalize_distribution(estimate) -> np.ndarray:
    """Clip negative weights to zero and scale to unit sum."""
    weights = estimate.weights if isinstance(estimate, SizeDistributionEstimate) else estimate
    clipped = np.maximum(np.asarray(weights, dtype=float), 0.0)
    total = clipped.sum()
    if not total > 0:
        raise DegenerateEstimateError("estimate has no positive weight")
    return clipped / total


def weights_to_number_density(estimate, bank: FormFactorBank, form_factor_scale: float) -> np.ndarray:
    """Beads per cm^3 for each size, inverting weights = n * s_i / s_T."""
    if not form_factor_scale > 0:
        raise ValueError(f"form factor scale must be > 0 (was {form_factor_scale})")
    weights = estimate.weights if isinstance(estimate, SizeDistributionEstimate) else np.asarray(estimate)
    return np.maximum(weights, 0.0) * form_factor_scale / bank.row_scales


def write_estimate(estimate: SizeDistributionEstimate, bank: FormFactorBank, csv_path, summary_path=None) -> None:
    try:
        probs = normalize_distribution(estimate)
    except DegenerateEstimateError:
        probs = np.zeros_like(estimate.weights)
    with open(csv_path, "w", newline="") as fh:
        fh.write("size_um,weight,probability,suppressed\n")
        for i, size in enumerate(bank.sizes):
            fh.write(
                f"{size:.17g},{estimate.weights[i]:.17g},{probs[i]:.17g},{int(i in estimate.suppressed)}\n"
            )
    if summary_path is not None:
        with open(summary_path, "w") as fh:
            json.dump(estimate.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
