#!/usr/bin/env python3
"""Singular spectrum of the form-factor bank and what it means for recovery.

Prints the condition number and numerical rank of a bank, then the relative
weight error of the pseudo-inverse on each default phantom for a few cutoffs.
Handy for seeing why exact recovery is out of reach in double precision.
"""

import argparse

import numpy as np

from scatsize import build_bank, default_phantoms, estimate_unconstrained, synthesize_phantom
from scatsize.bank import linear_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=float, nargs=3, default=[16, 96, 2], metavar=("MIN", "MAX", "STEP"))
    ap.add_argument("--freqs", type=float, nargs=3, default=[3, 9, 0.1], metavar=("MIN", "MAX", "STEP"))
    args = ap.parse_args()

    bank = build_bank(linear_grid(*args.sizes, "sizes"), linear_grid(*args.freqs, "frequencies"))
    s = np.linalg.svd(bank.matrix, compute_uv=False)
    eps = np.finfo(float).eps
    print(f"bank {bank.shape[0]}x{bank.shape[1]}: cond={s[0] / s[-1]:.3e}, "
          f"numerical rank={int((s > s[0] * max(bank.shape) * eps).sum())}")
    print("singular values / s_max:", " ".join(f"{v:.1e}" for v in s[::max(1, s.size // 12)] / s[0]))

    cutoffs = (1e-15, 1e-12, 1e-8, 1e-3)
    print(f"{'phantom':<16}" + "".join(f"{'rcond ' + format(r, 'g'):>14}" for r in cutoffs))
    for phantom in default_phantoms():
        _, ft, truth = synthesize_phantom(phantom, bank)
        errs = []
        for r in cutoffs:
            w = estimate_unconstrained(ft, bank, r).weights
            errs.append(np.linalg.norm(w - truth.weights) / np.linalg.norm(truth.weights))
        print(f"{phantom.name:<16}" + "".join(f"{e:>14.3e}" for e in errs))


if __name__ == "__main__":
    main()
