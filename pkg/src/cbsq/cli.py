"""Command-line harness: config parsing, dispatch, persistence.

Subcommands: linear, simulate, sweep, verify-multiplier, fit-decay.
Exit codes (frozen compatibility contract):

    0  success
    2  config error (bad document, unknown key, index-condition violation)
    3  verification failure (multiplier inequality violated)
    4  numerical abort (confinement breach, NaN, quadrature failure)
    5  I/O error (unwritable path, corrupt checkpoint)

All output files are written atomically (temp + rename).  The env var
CBSQ_THREADS caps intra-run parallelism (sweep --jobs is clamped to it).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .config import RunConfig, emit_config, parse_config
from .diagnostics import (DECAY_CSV_COLUMNS, ENERGY_CSV_COLUMNS,
                          THRESHOLD_CSV_COLUMNS, energy_report, fit_efold,
                          scaling_regression, threshold_sweep)
from .errors import (CheckpointError, ConfigError, ConfinementError,
                     NumericalAccuracyError, SolverAbort, VerificationError)
from .linear import LinearState, evolve_coupled_exact, evolve_scalar_exact
from .multiplier import build_table, verify_enhanced_bound
from .solver import (StepperConfig, make_initial_data, read_checkpoint,
                     simulate, write_checkpoint)
from .spectral import FrequencyLattice, weighted_l2_norm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def atomic_write(path: str, data) -> None:
    """Write bytes/str to path via a temp file in the same directory."""
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(out_dir: str, cfg: RunConfig, outputs: dict, started: float) -> None:
    manifest = {
        "tool": "cbsq",
        "version": __version__,
        "config": emit_config(cfg),
        "config_hash": content_hash(emit_config(cfg)),
        "threads_cap": os.environ.get("CBSQ_THREADS"),
        "growth_factor_note": f"stability guard uses growth factor {cfg.growth_factor}",
        "wall_clock_s": time.time() - started,
        "outputs": outputs,
    }
    atomic_write(os.path.join(out_dir, "manifest.json"),
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _hash_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _lattice(cfg: RunConfig) -> FrequencyLattice:
    return FrequencyLattice(cfg.kmax, cfg.jmax, cfg.ly)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_verify_multiplier(cfg: RunConfig, out_dir: str) -> int:
    lat = _lattice(cfg)
    try:
        table = build_table(lat, cfg.nu, t=0.0, mu=cfg.mu)
        report = verify_enhanced_bound(table)
    except VerificationError as exc:
        atomic_write(os.path.join(out_dir, "multiplier_report.json"),
                     json.dumps({"passed": False, "error": str(exc)}, indent=2) + "\n")
        print(f"verify-multiplier: FAIL ({exc})")
        return EXIT_VERIFY
    atomic_write(os.path.join(out_dir, "multiplier_report.json"),
                 json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"verify-multiplier: PASS  min_slack_m1={report['min_slack_m1']:.6g} "
          f"min_slack_full={report['min_slack_full']:.6g}")
    return EXIT_OK


def cmd_linear(cfg: RunConfig, out_dir: str) -> int:
    lat = _lattice(cfg)
    state = make_initial_data(lat, cfg.physics(), cfg.seed,
                              omega_hb=cfg.epsilon * cfg.nu ** cfg.beta,
                              theta_hb=cfg.epsilon * cfg.nu ** cfg.alpha)
    state0 = LinearState(state.omega, state.theta, cfg.physics())
    times = np.arange(0.0, cfg.t_end + 1e-12, cfg.report_every)
    energy_rows, mode_rows = [], []
    ks = list(range(0, lat.Kmax + 1))
    for t in times:
        st = evolve_coupled_exact(state0, float(t), quad_tol=1e-10)
        energy_rows.append(energy_report(st).row())
        row = [float(t)]
        for k in ks:
            row.append(float(np.sqrt(np.sum(np.abs(st.omega.coeffs[k, :]) ** 2)
                                     * lat.cell_measure)))
            row.append(float(np.sqrt(np.sum(np.abs(st.theta.coeffs[k, :]) ** 2)
                                     * lat.cell_measure)))
        mode_rows.append(row)
    write_csv(os.path.join(out_dir, "energy.csv"), ENERGY_CSV_COLUMNS, energy_rows)
    mode_cols = ["t"] + [f"{f}_k{k}" for k in ks for f in ("omega", "theta")]
    write_csv(os.path.join(out_dir, "modes.csv"), mode_cols, mode_rows)
    print(f"linear: wrote {len(times)} reports to {out_dir}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out_dir: str, resume_path: str | None = None) -> int:
    lat = _lattice(cfg)
    stepper = StepperConfig(dt_max=cfg.dt_max, cfl_safety=cfg.cfl_safety,
                            scheme=cfg.scheme)
    if resume_path is not None:
        state = read_checkpoint(resume_path, cfg.physics())
    else:
        state = make_initial_data(
            lat, cfg.physics(), cfg.seed,
            omega_hb=cfg.epsilon * cfg.nu ** cfg.beta,
            theta_hb=cfg.epsilon * cfg.nu ** cfg.alpha)

    ckpt_paths = []

    def checkpoint_fn(st):
        path = os.path.join(out_dir, f"checkpoint_t{st.t:.6f}.cbsq")
        write_checkpoint(path, st)
        ckpt_paths.append(path)

    reports, final = simulate(state, stepper, cfg.t_end, cfg.report_every,
                              checkpoint_every=cfg.checkpoint_every,
                              checkpoint_fn=checkpoint_fn,
                              warn=lambda m: print(f"warning: {m}", file=sys.stderr))
    write_csv(os.path.join(out_dir, "energy.csv"), ENERGY_CSV_COLUMNS,
              [r.row() for r in reports])
    final_path = os.path.join(out_dir, "final.cbsq")
    write_checkpoint(final_path, final)
    print(f"simulate: t={final.t:.6g} steps={final.step_count} "
          f"final_hash={_hash_file(final_path)[:16]}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out_dir: str, nu_grid, beta_grid, jobs: int) -> int:
    lat = _lattice(cfg)
    stepper = StepperConfig(dt_max=cfg.dt_max, cfl_safety=cfg.cfl_safety,
                            scheme=cfg.scheme)
    table = threshold_sweep(lat, cfg.physics(), stepper, beta_grid, nu_grid,
                            cfg.horizon_efolds, cfg.seed, epsilon=cfg.epsilon,
                            growth_factor=cfg.growth_factor, jobs=jobs)
    write_csv(os.path.join(out_dir, "threshold.csv"), THRESHOLD_CSV_COLUMNS,
              table.rows())
    summary = {
        "growth_factor": table.growth_factor,
        "cells": [{"nu": c.nu, "beta_test": c.beta_test,
                   "classification": c.classification,
                   "max_ratio": c.max_ratio, "reason": c.reason}
                  for c in table.cells],
    }
    atomic_write(os.path.join(out_dir, "threshold.json"),
                 json.dumps(summary, indent=2) + "\n")
    print(f"sweep: {len(table.cells)} cells -> {out_dir}/threshold.csv")
    return EXIT_OK


def cmd_fit_decay(cfg: RunConfig, out_dir: str) -> int:
    lat = _lattice(cfg)
    nu_grid = [1e-2, 1e-3, 1e-4]
    k_list = [1, 2, 4, 8]
    rng = np.random.default_rng(cfg.seed)
    # broad-in-y, per-k localized profile; same envelope for every (nu, k)
    envelope = np.exp(-(lat.eta[0] / 0.5) ** 2 / 2.0) * (1.0 + 0.1 * rng.random(lat.Ny))
    fits = []
    for nu in nu_grid:
        for k in k_list:
            c = np.zeros((lat.Nx, lat.Ny), dtype=np.complex128)
            c[k, :] = envelope
            from .spectral import SpectralField
            f0 = SpectralField(lat, c, 0.0)
            t_scale = nu ** (-1.0 / 3.0) * k ** (-2.0 / 3.0)
            times = np.linspace(0.0, 6.0 * t_scale, 400)
            series = [weighted_l2_norm(evolve_scalar_exact(f0, nu, cfg.sigma, float(t)))
                      for t in times]
            fits.append(fit_efold(times, series, k=k, nu=nu))
    write_csv(os.path.join(out_dir, "decay.csv"), DECAY_CSV_COLUMNS,
              [[f.k, f.nu, f.t_efold, f.fit_quality, int(f.valid)] for f in fits])
    p_nu, q_k, r2 = scaling_regression(fits)
    atomic_write(os.path.join(out_dir, "regression.json"),
                 json.dumps({"p_nu": p_nu, "q_k": q_k, "r2": r2}, indent=2) + "\n")
    print(f"fit-decay: p_nu={p_nu:.4f} q_k={q_k:.4f} r2={r2:.5f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbsq",
                                description="Couette/Boussinesq spectral toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("linear", "simulate", "sweep", "verify-multiplier", "fit-decay"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="path to key=value config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--override-index-check", action="store_true")
        if name == "simulate":
            sp.add_argument("--resume", default=None,
                            help="checkpoint file to continue from")
        if name == "sweep":
            sp.add_argument("--nu-grid", default=None,
                            help="comma-separated nu values")
            sp.add_argument("--beta-grid", default=None,
                            help="comma-separated beta values")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text, override_index_check=args.override_index_check,
                           warn=lambda m: print(f"warning: {m}", file=sys.stderr))
        cfg.mode = args.command
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = args.out or cfg.output_dir
        os.makedirs(out_dir, exist_ok=True)

        jobs = max(1, args.jobs)
        cap = os.environ.get("CBSQ_THREADS")
        if cap:
            jobs = min(jobs, max(1, int(cap)))

        if args.command == "verify-multiplier":
            status = cmd_verify_multiplier(cfg, out_dir)
        elif args.command == "linear":
            status = cmd_linear(cfg, out_dir)
        elif args.command == "simulate":
            status = cmd_simulate(cfg, out_dir, resume_path=args.resume)
        elif args.command == "sweep":
            nu_grid = [float(x) for x in args.nu_grid.split(",")] \
                if args.nu_grid else [cfg.nu]
            beta_grid = [float(x) for x in args.beta_grid.split(",")] \
                if args.beta_grid else [cfg.beta]
            status = cmd_sweep(cfg, out_dir, nu_grid, beta_grid, jobs)
        else:
            status = cmd_fit_decay(cfg, out_dir)
        write_manifest(out_dir, cfg, {}, started)
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ConfinementError, SolverAbort, NumericalAccuracyError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CheckpointError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
