"""Spherical Bessel functions of integer order for real positive arguments.

``j_n`` uses Miller's downward recurrence normalized against ``j_0`` or
``j_1`` (whichever is larger in magnitude at ``x``), and ``y_n`` uses the
upward recurrence from the closed forms of ``y_0`` and ``y_1``.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 200

# rescale threshold for the downward recurrence
_BIG = 1e150


def _check(nmax: int, x: float) -> None:
    if not x > 0:
        raise ValueError(f"argument must be > 0 (was {x})")
    if nmax < 0:
        raise ValueError(f"order must be >= 0 (was {nmax})")
    if nmax > MAX_ORDER:
        raise ValueError(f"order {nmax} beyond supported range 0..{MAX_ORDER}")


def _start_order(nmax: int, x: float) -> int:
    m = max(nmax, int(math.ceil(x)))
    return m + 20 + int(math.sqrt(40.0 * m))


def spherical_jn_all(nmax: int, x: float) -> np.ndarray:
    """Return ``[j_0(x), ..., j_nmax(x)]``."""
    _check(nmax, x)
    top = _start_order(nmax, x)
    vals = np.zeros(top + 2)
    vals[top] = 1e-300
    for n in range(top, 0, -1):
        # j_{n-1} = (2n+1)/x j_n - j_{n+1}
        vals[n - 1] = (2 * n + 1) / x * vals[n] - vals[n + 1]
        if abs(vals[n - 1]) > _BIG:
            vals[n - 1 :] /= _BIG
    j0 = math.sin(x) / x
    j1 = math.sin(x) / (x * x) - math.cos(x) / x
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    return vals[: nmax + 1] * scale


def spherical_yn_all(nmax: int, x: float) -> np.ndarray:
    """Return ``[y_0(x), ..., y_nmax(x)]``; entries overflow to ``-inf`` for tiny ``x``."""
    _check(nmax, x)
    out = np.empty(nmax + 1)
    out[0] = -math.cos(x) / x
    if nmax >= 1:
        out[1] = -math.cos(x) / (x * x) - math.sin(x) / x
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def spherical_bessel_j(order: int, x: float) -> float:
    return float(spherical_jn_all(order, x)[order])


def spherical_bessel_y(order: int, x: float) -> float:
    return float(spherical_yn_all(order, x)[order])
