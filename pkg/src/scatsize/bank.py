"""Form-factor bank: one max-normalized sigma_b / f^4 spectrum per candidate size."""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .faran import GLASS_BEADS, AcousticMaterials, ConvergenceError, backscatter_cross_section

BANK_VERSION = 1
SIZE_CONVENTIONS = ("diameter", "radius")

SpectrumModel = Callable[[float, float], float]


class BankFormatError(ValueError):
    """A bank file could not be parsed into a consistent bank."""


class BankShapeError(BankFormatError):
    pass


class BankVersionError(BankFormatError):
    pass


def check_grid(values, name: str = "grid") -> np.ndarray:
    """Validate a strictly increasing, positive 1-D grid and return it as floats."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} values must be finite and > 0")
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return arr


def linear_grid(start: float, stop: float, step: float, name: str = "grid") -> np.ndarray:
    """Inclusive evenly spaced grid ``start, start+step, ..., stop``.

    Values are rounded to 10 decimals so that 3 + 0.1 * 61 steps lands on the
    same floats however it is generated.
    """
    if not step > 0:
        raise ValueError(f"{name} step must be > 0 (was {step})")
    if start > stop:
        raise ValueError(f"{name} min must not exceed max ({start} > {stop})")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return check_grid(np.round(start + step * np.arange(count), 10), name)


@dataclass(frozen=True, eq=False)
class FormFactorBank:
    sizes: np.ndarray  # um
    frequencies: np.ndarray  # MHz
    matrix: np.ndarray  # (n_sizes, n_frequencies)
    row_scales: np.ndarray  # max_j sigma_b / f^4 per size, (m^2/sr)/MHz^4
    materials: AcousticMaterials = GLASS_BEADS
    size_convention: str = "diameter"

    def __post_init__(self):
        sizes = check_grid(self.sizes, "sizes")
        freqs = check_grid(self.frequencies, "frequencies")
        matrix = np.asarray(self.matrix, dtype=float)
        scales = np.asarray(self.row_scales, dtype=float)
        if matrix.shape != (sizes.size, freqs.size):
            raise BankShapeError(
                f"matrix shape {matrix.shape} does not match grids ({sizes.size}, {freqs.size})"
            )
        if scales.shape != (sizes.size,):
            raise BankShapeError(f"row_scales length {scales.shape} does not match {sizes.size} sizes")
        if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
            raise ValueError("row_scales must be finite and > 0")
        if self.size_convention not in SIZE_CONVENTIONS:
            raise ValueError(f"size_convention must be one of {SIZE_CONVENTIONS}")
        for name, arr in (("sizes", sizes), ("frequencies", freqs), ("matrix", matrix), ("row_scales", scales)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def cross_sections(self) -> np.ndarray:
        """sigma_b(size_i, f_j) recovered from the normalized rows."""
        return self.matrix * self.row_scales[:, None] * self.frequencies[None, :] ** 4

    def same_as(self, other: "FormFactorBank") -> bool:
        return (
            np.array_equal(self.sizes, other.sizes)
            and np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.matrix, other.matrix)
            and np.array_equal(self.row_scales, other.row_scales)
            and self.materials == other.materials
            and self.size_convention == other.size_convention
        )


def _faran_row(args) -> np.ndarray:
    i, size, freqs, materials, size_is_radius = args
    row = np.empty(len(freqs))
    for j, f in enumerate(freqs):
        try:
            row[j] = backscatter_cross_section(size, f, materials, size_is_radius=size_is_radius).cross_section
        except ConvergenceError as exc:
            raise ConvergenceError(f"bank cell ({i}, {j}) size={size} um f={f} MHz: {exc}") from exc
    return row


def build_bank(
    sizes,
    frequencies,
    materials: AcousticMaterials = GLASS_BEADS,
    model: SpectrumModel | None = None,
    size_convention: str = "diameter",
    workers: int | None = None,
) -> FormFactorBank:
    """Evaluate sigma_b on the grid, divide by f^4 and max-normalize each row.

    Both grids are sorted before evaluation, so the result does not depend on
    the order the points are supplied in. ``model(size_um, f_mhz)`` replaces
    the Faran spectrum when given. ``workers > 1`` spreads rows over processes
    (Faran model only); every cell is computed independently, so the output is
    identical either way.
    """
    sizes = check_grid(np.sort(np.asarray(sizes, dtype=float)), "sizes")
    freqs = check_grid(np.sort(np.asarray(frequencies, dtype=float)), "frequencies")
    if size_convention not in SIZE_CONVENTIONS:
        raise ValueError(f"size_convention must be one of {SIZE_CONVENTIONS}")

    if model is None:
        jobs = [(i, float(s), freqs.tolist(), materials, size_convention == "radius") for i, s in enumerate(sizes)]
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_faran_row, jobs))
        else:
            rows = [_faran_row(job) for job in jobs]
        sigma = np.vstack(rows)
    else:
        sigma = np.array([[model(float(s), float(f)) for f in freqs] for s in sizes], dtype=float)

    reduced = sigma / freqs[None, :] ** 4
    scales = reduced.max(axis=1)
    if np.any(scales <= 0):
        bad = int(np.argmin(scales))
        raise ValueError(f"spectrum for size {sizes[bad]} um is identically zero on the band")
    matrix = reduced / scales[:, None]
    return FormFactorBank(sizes, freqs, matrix, scales, materials, size_convention)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _array(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def dumps_bank(bank: FormFactorBank) -> str:
    materials = ", ".join(f'"{k}": {_fmt(v)}' for k, v in bank.materials.to_dict().items())
    rows = ",\n    ".join(_array(row) for row in bank.matrix)
    return (
        "{\n"
        f'  "version": {BANK_VERSION},\n'
        f'  "size_convention": "{bank.size_convention}",\n'
        f'  "materials": {{{materials}}},\n'
        f'  "sizes_um": {_array(bank.sizes)},\n'
        f'  "frequencies_mhz": {_array(bank.frequencies)},\n'
        f'  "row_scales": {_array(bank.row_scales)},\n'
        f'  "matrix": [\n    {rows}\n  ]\n'
        "}\n"
    )


def save_bank(bank: FormFactorBank, path) -> None:
    """Write the bank as JSON with 17 significant digits; the write is atomic."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bank-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps_bank(bank))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def loads_bank(text: str) -> FormFactorBank:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"malformed bank document: {exc}") from exc
    if not isinstance(doc, dict):
        raise BankFormatError("bank document must be an object")
    missing = {"version", "materials", "sizes_um", "frequencies_mhz", "row_scales", "matrix"} - doc.keys()
    if missing:
        raise BankFormatError(f"bank document lacks fields {sorted(missing)}")
    if doc["version"] != BANK_VERSION:
        raise BankVersionError(f"unsupported bank version {doc['version']!r} (expected {BANK_VERSION})")
    try:
        materials = AcousticMaterials(**{k: float(v) for k, v in doc["materials"].items()})
        sizes = np.asarray(doc["sizes_um"], dtype=float)
        freqs = np.asarray(doc["frequencies_mhz"], dtype=float)
        scales = np.asarray(doc["row_scales"], dtype=float)
        rows = doc["matrix"]
        if not isinstance(rows, list) or any(not isinstance(r, list) or len(r) != freqs.size for r in rows):
            raise BankShapeError("matrix rows do not match the frequency grid")
        if len(rows) != sizes.size:
            raise BankShapeError(f"matrix has {len(rows)} rows for {sizes.size} sizes")
        matrix = np.asarray(rows, dtype=float).reshape(sizes.size, freqs.size)
        return FormFactorBank(
            sizes, freqs, matrix, scales, materials, doc.get("size_convention", "diameter")
        )
    except BankFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise BankFormatError(f"inconsistent bank document: {exc}") from exc


def load_bank(path) -> FormFactorBank:
    with open(path) as fh:
        return loads_bank(fh.read())
