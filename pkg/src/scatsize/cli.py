"""Command-line driver.

    scatsize bank     build and save the form-factor bank
    scatsize phantom  synthesize phantom spectra and ground truth
    scatsize estimate estimate a size distribution from a spectrum CSV
    scatsize sweep    noise-robustness sweep
    scatsize range    print the estimable size window
    scatsize validate four-phantom validation, plot-ready CSVs

Exit codes: 0 success, 2 configuration or contract error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import experiments
from .bank import BankFormatError, FormFactorBank, build_bank, load_bank, save_bank
from .config import ConfigError, RunConfig, load_config, phantom_to_dict
from .estimator import (
    SuppressionPolicy,
    estimate_constrained,
    estimate_unconstrained,
    weights_to_number_density,
    write_estimate,
)
from .evaluation import estimable_size_range, noise_sweep
from .faran import ConvergenceError
from .phantom import (
    RNG_ALGORITHM,
    MaterialMismatchError,
    SpectrumVector,
    add_noise,
    synthesize_phantom,
    to_form_factor,
    unit_max,
)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


def write_spectrum(spectrum: SpectrumVector, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("frequency_mhz,value\n")
        for f, v in zip(spectrum.frequencies, spectrum.values):
            fh.write(f"{f:.17g},{v:.17g}\n")


def read_spectrum(path, kind: str = "form_factor", scale: float = 1.0) -> SpectrumVector:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frequency_mhz", "value"]:
            raise UsageError(f"{path}: expected header 'frequency_mhz,value'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if not rows:
        raise UsageError(f"{path}: no spectrum rows")
    freqs, values = zip(*rows)
    return SpectrumVector(np.array(freqs), np.array(values), kind, scale)


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.noise = type(cfg.noise)(cfg.noise.variance, cfg.noise.trials, args.seed, cfg.noise.phantom)
    if getattr(args, "variance", None) is not None:
        cfg.noise = type(cfg.noise)(args.variance, cfg.noise.trials, cfg.noise.seed, cfg.noise.phantom)
    if getattr(args, "trials", None) is not None:
        cfg.noise = type(cfg.noise)(cfg.noise.variance, args.trials, cfg.noise.seed, cfg.noise.phantom)
    if getattr(args, "phantom", None):
        cfg.noise = type(cfg.noise)(cfg.noise.variance, cfg.noise.trials, cfg.noise.seed, args.phantom)
    pol = cfg.policy
    mode = args.mode.replace("-", "_") if getattr(args, "mode", None) else pol.mode
    theta = args.theta if getattr(args, "theta", None) is not None else pol.threshold_fraction
    iters = args.max_iterations if getattr(args, "max_iterations", None) is not None else pol.max_iterations
    cfg.policy = SuppressionPolicy(mode, theta, iters)
    if getattr(args, "rcond", None) is not None:
        cfg.rcond = args.rcond
    return cfg


def _bank(cfg: RunConfig, path) -> FormFactorBank:
    if path:
        bank = load_bank(path)
    else:
        bank = build_bank(cfg.size_grid(), cfg.frequency_grid(), cfg.materials,
                          size_convention=cfg.size_convention, workers=cfg.workers)
    if bank.materials != cfg.materials:
        raise MaterialMismatchError("bank materials differ from the configured materials")
    return bank


def cmd_bank(args) -> int:
    cfg = _config(args)
    sizes, freqs = cfg.size_grid(), cfg.frequency_grid()
    start = time.perf_counter()
    bank = build_bank(sizes, freqs, cfg.materials, size_convention=cfg.size_convention, workers=cfg.workers)
    elapsed = time.perf_counter() - start
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "bank.json")
    save_bank(bank, path)
    print(f"bank {bank.shape[0]}x{bank.shape[1]} written to {path} in {elapsed:.2f} s")
    return 0


def cmd_phantom(args) -> int:
    cfg = _config(args)
    bank = _bank(cfg, args.bank)
    for phantom in cfg.phantom_specs():
        bsc, ft, truth = synthesize_phantom(phantom, bank)
        folder = os.path.join(cfg.out_dir, "phantoms", phantom.name)
        os.makedirs(folder, exist_ok=True)
        write_spectrum(bsc, os.path.join(folder, "bsc.csv"))
        write_spectrum(ft, os.path.join(folder, "form_factor.csv"))
        meta = {"phantom": phantom_to_dict(phantom), "form_factor_scale": ft.scale}
        if args.noise_variance:
            noisy = add_noise(unit_max(bsc), args.noise_variance, cfg.noise.seed)
            write_spectrum(noisy, os.path.join(folder, "bsc_noisy.csv"))
            noisy_ft = to_form_factor(noisy)
            write_spectrum(noisy_ft, os.path.join(folder, "form_factor_noisy.csv"))
            meta["noise"] = {"variance": args.noise_variance, "seed": cfg.noise.seed, "rng": RNG_ALGORITHM}
        with open(os.path.join(folder, "ground_truth.csv"), "w", newline="") as fh:
            fh.write("size_um,number_density_per_cm3,weight,probability\n")
            for i, size in enumerate(truth.sizes):
                fh.write(
                    f"{size:.17g},{truth.number_densities[i]:.17g},"
                    f"{truth.weights[i]:.17g},{truth.probabilities[i]:.17g}\n"
                )
        with open(os.path.join(folder, "phantom.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"phantom {phantom.name} -> {folder}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args)
    if not args.bank:
        raise UsageError("--bank is required")
    bank = load_bank(args.bank)
    spectrum = read_spectrum(args.spectrum, args.kind)
    ft = to_form_factor(spectrum) if args.kind == "bsc" else spectrum
    os.makedirs(cfg.out_dir, exist_ok=True)
    methods = ("unconstrained", "constrained") if args.method == "both" else (args.method,)
    for method in methods:
        if method == "unconstrained":
            est = estimate_unconstrained(ft, bank, cfg.rcond)
        else:
            est = estimate_constrained(ft, bank, cfg.policy, cfg.rcond)
        stem = os.path.join(cfg.out_dir, f"estimate_{method}")
        write_estimate(est, bank, stem + ".csv", stem + ".json")
        if args.scale:
            dens = weights_to_number_density(est, bank, args.scale)
            with open(stem + "_density.csv", "w", newline="") as fh:
                fh.write("size_um,number_density_per_cm3\n")
                for size, n in zip(bank.sizes, dens):
                    fh.write(f"{size:.17g},{n:.17g}\n")
        print(f"{method}: residual {est.residual_l2:.3e}, {len(est.suppressed)} sizes suppressed -> {stem}.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    bank = _bank(cfg, args.bank)
    phantom = cfg.phantom(cfg.noise.phantom)
    result = noise_sweep(phantom, bank, cfg.noise.variance, cfg.noise.trials, cfg.noise.seed, cfg.policy, cfg.rcond)
    os.makedirs(cfg.out_dir, exist_ok=True)
    result.write_csv(os.path.join(cfg.out_dir, "sweep.csv"))
    result.write_summary(os.path.join(cfg.out_dir, "sweep_summary.json"))
    summary = result.summary()
    for method in ("unconstrained", "constrained"):
        s = summary[method]
        print(f"{method}: mae_in_range {s['mae_in_range_mean']:.5f} +/- {s['mae_in_range_std']:.5f}"
              f" ({s['failures']} failed trials)")
    return 0


def cmd_range(args) -> int:
    cfg = load_config(args.config)
    f_min = args.fmin if args.fmin is not None else cfg.frequencies.min
    f_max = args.fmax if args.fmax is not None else cfg.frequencies.max
    speed = args.speed if args.speed is not None else cfg.materials.background_speed
    window = estimable_size_range(f_min, f_max, speed)
    print(f"size_min_um={window.size_min:.4f} size_max_um={window.size_max:.4f} "
          f"(ka {window.ka_low}..{window.ka_high}, f {f_min}..{f_max} MHz, c {speed} mm/us)")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    bank = _bank(cfg, args.bank)
    runs = experiments.reproduce(cfg.phantom_specs(), bank, cfg.policy, cfg.rcond, cfg.noise.variance, cfg.noise.seed)
    experiments.write_runs(runs, cfg.out_dir)
    for run in runs:
        r1, r2 = run.reports["unconstrained"], run.reports["constrained"]
        print(f"{run.name}: mae_in_range {r1.mae_in_range:.5f} -> {r2.mae_in_range:.5f}, "
              f"out-of-range mass {r2.out_of_range_mass:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scatsize", description="Scatterer size distributions from BSC spectra")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy=False, bank=False):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="noise seed")
        if bank:
            p.add_argument("--bank", help="precomputed bank file (built from the config when omitted)")
        if policy:
            p.add_argument("--theta", type=float, help="suppression threshold as a fraction of the peak weight")
            p.add_argument("--rcond", type=float, help="relative singular-value cutoff")
            p.add_argument("--mode", choices=["threshold", "contiguous-run"])
            p.add_argument("--max-iterations", type=int)

    p = sub.add_parser("bank", help="build and save the form-factor bank")
    common(p)
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("phantom", help="synthesize phantom spectra")
    common(p, bank=True)
    p.add_argument("--noise-variance", type=float, default=0.0,
                   help="also write a noisy unit-max BSC and its form factor")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("estimate", help="estimate a size distribution")
    common(p, policy=True, bank=True)
    p.add_argument("--spectrum", required=True, help="CSV with header frequency_mhz,value")
    p.add_argument("--kind", choices=["form_factor", "bsc"], default="form_factor")
    p.add_argument("--method", choices=["unconstrained", "constrained", "both"], default="both")
    p.add_argument("--scale", type=float, help="form factor normalization constant, to report number densities")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="noise-robustness sweep")
    common(p, policy=True, bank=True)
    p.add_argument("--variance", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--phantom", help="name of the configured phantom to sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("range", help="print the estimable size window")
    p.add_argument("--config")
    p.add_argument("--fmin", type=float)
    p.add_argument("--fmax", type=float)
    p.add_argument("--speed", type=float, help="background sound speed, mm/us")
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("validate", help="four-phantom validation with plot-ready CSVs")
    common(p, policy=True, bank=True)
    p.add_argument("--variance", type=float)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, UsageError, BankFormatError, MaterialMismatchError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
