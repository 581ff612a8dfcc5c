"""Command-line entry points: one subcommand per experiment family.

Every subcommand reads an optional JSON config (--config), applies the global
overrides (--out, --threads, --seed), writes its CSV table next to a JSON run
manifest, and prints the output paths.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from gkplab.config import (
    CombConfig,
    ExperimentConfig,
    GateConfig,
    write_manifest,
    write_rows_csv,
)
from gkplab.errors import GkplabError
from gkplab import experiments
from gkplab.geometry import EnergyParams, geometry
from gkplab.logical import write_portrait_csv
from gkplab.spectral import SigmaParams, tsigma_spectrum, write_spectrum_csv


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg.validate()


def _emit(cfg: ExperimentConfig, rows, columns, default_stem: str, extra=None):
    stem = cfg.out or default_stem
    csv_path = stem if stem.endswith(".csv") else stem + ".csv"
    manifest_path = os.path.splitext(csv_path)[0] + ".manifest.json"
    write_rows_csv(rows, columns, csv_path)
    write_manifest(cfg, manifest_path, extra=extra)
    print(csv_path)
    print(manifest_path)


def _cmd_simulate(args):
    cfg = _load_config(args)
    rows = experiments.run_noise_sweep(cfg)
    _emit(cfg, rows, experiments.NOISE_SWEEP_COLUMNS, "simulate")


def _cmd_spectrum(args):
    cfg = _load_config(args)
    geom = geometry(cfg.geometry)
    stem = cfg.out or "spectrum"
    csv_path = stem if stem.endswith(".csv") else stem + ".csv"
    ep = EnergyParams.from_epsilon(geom, cfg.epsilon[0])
    kog = cfg.noise_strengths[0] if cfg.noise_channel == "quadrature" else 0.0
    sp = SigmaParams.for_code(geom, ep, kog)
    if geom.family == "square":
        res = tsigma_spectrum(sp.sigma, count=8)
    else:
        from gkplab.spectral import build_lsigma_hexa, eigen_small_2d

        kmax = max(40, int(10.0 / sp.sigma))
        res = eigen_small_2d(build_lsigma_hexa(sp.sigma, kmax), count=8)
    write_spectrum_csv(sp.sigma, res, csv_path)
    write_manifest(cfg, os.path.splitext(csv_path)[0] + ".manifest.json")
    print(csv_path)


def _cmd_sweep_noise(args):
    cfg = _load_config(args)
    if cfg.noise_channel == "none":
        cfg.noise_channel = "quadrature"
        cfg.noise_strengths = [2e-2, 5e-2, 1e-1]
    rows = experiments.run_noise_sweep(cfg)
    _emit(cfg, rows, experiments.NOISE_SWEEP_COLUMNS, "sweep_noise")


def _cmd_comb(args):
    cfg = _load_config(args)
    if cfg.comb is None:
        cfg.comb = CombConfig()
    rows = experiments.run_comb_truncation(cfg)
    _emit(cfg, rows, experiments.COMB_COLUMNS, "comb_truncation")


def _cmd_instability(args):
    cfg = _load_config(args)
    if cfg.dims is None:
        cfg.dims = [200, 400]
    rows = experiments.run_instability(cfg)
    _emit(cfg, rows, experiments.INSTABILITY_COLUMNS, "instability")


def _cmd_gate(args):
    cfg = _load_config(args)
    if cfg.gate is None:
        cfg.gate = GateConfig()
    rows = experiments.run_gate(cfg)
    _emit(cfg, rows, experiments.GATE_COLUMNS, "gate")


def _cmd_portrait(args):
    cfg = _load_config(args)
    rows = experiments.run_portrait(cfg)
    stem = cfg.out or "portrait"
    csv_path = stem if stem.endswith(".csv") else stem + ".csv"
    write_portrait_csv(rows, csv_path)
    write_manifest(cfg, os.path.splitext(csv_path)[0] + ".manifest.json")
    print(csv_path)


def _cmd_wrong_eta(args):
    cfg = _load_config(args)
    rows = experiments.run_wrong_eta(cfg)
    cols = ["geometry", "epsilon", "eta_ratio", "dim", "dt", "t_final",
            "gamma_l", "resid", "flagged", "status"]
    _emit(cfg, rows, cols, "wrong_eta")


def _cmd_miscalibration(args):
    cfg = _load_config(args)
    if cfg.comb is None:
        cfg.comb = CombConfig(N=[120])
    rows = experiments.run_miscalibration(cfg)
    _emit(cfg, rows, experiments.COMB_COLUMNS, "miscalibration")


def _cmd_adiabatic(args):
    cfg = _load_config(args)
    result = experiments.run_adiabatic_check(cfg)
    rows = [
        {"g_over_kappa": result["g_over_kappa"], "dim_a": result["dim_a"],
         "dim_b": result["dim_b"], "gamma_eff": result["gamma_eff"],
         "observable": name, "max_rel_diff": diff}
        for name, diff in result["per_observable"].items()
    ]
    cols = ["g_over_kappa", "dim_a", "dim_b", "gamma_eff", "observable", "max_rel_diff"]
    _emit(cfg, rows, cols, "adiabatic_check")


def _cmd_optimal_epsilon(args):
    cfg = _load_config(args)
    if cfg.noise_channel == "none":
        cfg.noise_channel = "quadrature"
        cfg.noise_strengths = [2e-2]
    rows = experiments.run_optimal_epsilon(cfg)
    _emit(cfg, rows, experiments.RATE_TABLE_COLUMNS, "optimal_epsilon")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gkplab",
        description="Dissipative stabilization of grid codes: sweeps, spectra, gates.",
    )
    parser.add_argument("--config", help="JSON experiment configuration", default=None)
    parser.add_argument("--out", help="output path stem or .csv file", default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: GKPLAB_WORKERS or 1)")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in (
        ("simulate", _cmd_simulate, "propagate the configured model and fit rates"),
        ("spectrum", _cmd_spectrum, "torus-operator spectrum for the configured code"),
        ("sweep-noise", _cmd_sweep_noise, "logical rates versus intrinsic noise strength"),
        ("comb-truncation", _cmd_comb, "logical rates versus comb harmonic count"),
        ("instability", _cmd_instability, "vacuum-start energy curves per dissipator family"),
        ("gate", _cmd_gate, "adiabatic Clifford gate by dissipator deformation"),
        ("portrait", _cmd_portrait, "phase-space drift field around the code state"),
        ("wrong-eta", _cmd_wrong_eta, "rates under lattice-spacing miscalibration"),
        ("miscalibration", _cmd_miscalibration, "rates under comb amplitude miscalibration"),
        ("adiabatic-check", _cmd_adiabatic, "two-mode model versus adiabatic reduction"),
        ("optimal-epsilon", _cmd_optimal_epsilon, "spectral scan around the optimal epsilon"),
    ):
        p = sub.add_parser(name, help=doc)
        p.set_defaults(func=fn)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except GkplabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
