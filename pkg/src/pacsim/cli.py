"""Command-line front end.

Subcommands: ``prepare`` (coherent-state stage: harmonic response +
fluctuation solve), ``meanfield`` (full ODE integration and harmonic-fit
report), ``pacs-scan`` (detection-statistics figure data), ``thermal-scan``
(residual-occupation figure data), ``validate`` (invariant suite).

Dimensioned quantities must carry SI-suffixed units (``50uW``, ``1K``,
``10ns``); bare numbers are rejected as ambiguous.  Exit codes: 0 success,
1 validation/solver failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import analytics as an
from . import figures, fock
from .errors import PacsimError
from .fluctuations import (build_drift_diffusion, periodic_modulation,
                           residual_occupation, steady_covariance_lyapunov,
                           steady_covariance_spectral)
from .io import write_json
from .meanfield import (analytic_fourier_solution, compare_trajectory_to_fourier,
                        integrate_meanfield)
from .params import (DriveParams, PulseSequence, PulseSpec, SystemParams,
                     coherent_amplitude_estimate, conversion_factor,
                     validate_sequence)

_PREFIXES = {"": 1.0, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6,
             "m": 1e-3, "k": 1e3, "M": 1e6, "G": 1e9}
_QUANTITY_RE = re.compile(
    r"^\s*([+-]?[0-9.]+(?:[eE][+-]?[0-9]+)?)\s*([pnuµmkMG]?)(W|K|s|Hz)\s*$")

#: Canonical pulse set: G_b = G_r/5 = 1e8 rad/s, tau_b = tau_r/4 = 10 ns.
CANONICAL_PULSES = {"g_write": 1e8, "tau_write": 1e-8,
                    "g_read": 5e8, "tau_read": 4e-8}


def parse_quantity(text: str, unit: str) -> float:
    """Parse ``50uW`` -> 5e-5 with the expected unit; bare numbers rejected."""
    m = _QUANTITY_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a valid quantity; write e.g. '50uW', '1K', "
            "'10ns' (bare numbers are ambiguous and rejected)")
    value, prefix, got_unit = m.groups()
    if got_unit != unit:
        raise argparse.ArgumentTypeError(
            f"{text!r} has unit {got_unit!r}, expected {unit!r}")
    return float(value) * _PREFIXES[prefix]


def _quantity(unit):
    return lambda text: parse_quantity(text, unit)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}: {exc}")


def _grid(text: str) -> np.ndarray:
    """'start:stop:count' -> inclusive linspace."""
    try:
        start, stop, count = text.split(":")
        grid = np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"bad grid {text!r} (want start:stop:count): {exc}")
    if grid.size == 0:
        raise argparse.ArgumentTypeError("grid must be non-empty")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise argparse.ArgumentTypeError("grid must be strictly increasing")
    return grid


def _load_params(args) -> SystemParams:
    overrides = {}
    if getattr(args, "T", None) is not None:
        overrides["temperature_K"] = args.T
    if args.config is not None:
        with open(args.config) as fh:
            cfg = json.load(fh)
        cfg.update(overrides)
        return SystemParams.from_config(cfg)
    return SystemParams.preset(args.preset, **overrides)


def _add_common(sub) -> None:
    sub.add_argument("--preset", default="simon17",
                     help="named parameter preset (default: simon17)")
    sub.add_argument("--config", type=Path, default=None,
                     help="JSON parameter file overriding --preset")
    sub.add_argument("--out", type=Path, default=Path("pacsim-out"),
                     help="output directory (default: ./pacsim-out)")
    sub.add_argument("--nmax", type=int, default=40,
                     help="Fock truncation per mode (default: 40)")
    sub.add_argument("--tol", type=float, default=1e-6,
                     help="cross-check tolerance (default: 1e-6)")
    sub.add_argument("--force", action="store_true",
                     help="proceed outside documented validity ranges")


def _default_conversions(params: SystemParams) -> tuple[float, float]:
    z = conversion_factor("write", CANONICAL_PULSES["g_write"],
                          CANONICAL_PULSES["tau_write"], params.kappa)
    b = conversion_factor("readout", CANONICAL_PULSES["g_read"],
                          CANONICAL_PULSES["tau_read"], params.kappa)
    return z, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacsim",
        description="Pulsed-protocol simulator for phonon-added coherent "
                    "states of a mechanical oscillator")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("prepare", help="coherent-state preparation stage")
    _add_common(p)
    p.add_argument("--P0", type=_quantity("W"), default=50e-6,
                   help="pump power (default 50uW)")
    p.add_argument("--P1", type=_quantity("W"), default=0.5e-6,
                   help="probe power (default 0.5uW)")
    p.add_argument("--T", type=_quantity("K"), default=None,
                   help="bath temperature override (e.g. 1K)")
    p.add_argument("--skip-modulation", action="store_true",
                   help="skip the periodic variance-modulation solve")

    p = subs.add_parser("meanfield", help="integrate the first-moment ODE")
    _add_common(p)
    p.add_argument("--P0", type=_quantity("W"), default=50e-6)
    p.add_argument("--P1", type=_quantity("W"), default=0.5e-6)
    p.add_argument("--T", type=_quantity("K"), default=None)
    p.add_argument("--t-final", type=_quantity("s"), default=None,
                   help="integration horizon (default 20/gamma)")
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--samples", type=int, default=2048)

    p = subs.add_parser("pacs-scan", help="emit fig2a-fig2d detection data")
    _add_common(p)
    p.add_argument("--beta-grid", type=_grid, default=None,
                   help="start:stop:count grid of |beta| (default 0:4:21)")
    p.add_argument("--B-list", type=_float_list, default=None,
                   help="comma list of readout residuals B")
    p.add_argument("--theta-grid", type=_grid, default=None,
                   help="start:stop:count grid of theta (rad)")
    p.add_argument("--Z", type=float, default=None,
                   help="write conversion override (default from pulses)")
    p.add_argument("--B", type=float, default=None,
                   help="readout residual for fig2c (default from pulses)")

    p = subs.add_parser("thermal-scan", help="emit fig3a/fig3b thermal data")
    _add_common(p)
    p.add_argument("--beta-grid", type=_grid, default=None)
    p.add_argument("--nbar0-list", type=_float_list, default=None,
                   help="comma list of residual occupations (default 0,0.2,0.45)")
    p.add_argument("--Z", type=float, default=None)
    p.add_argument("--B", type=float, default=None)

    p = subs.add_parser("validate", help="run the invariant suite")
    _add_common(p)
    p.add_argument("--tau-c", type=_quantity("s"), default=10e-6)
    p.add_argument("--tau-pd", type=_quantity("s"), default=None,
                   help="photon-decay wait (default 100/kappa)")
    p.add_argument("--tau-b", type=_quantity("s"),
                   default=CANONICAL_PULSES["tau_write"])
    p.add_argument("--tau-d", type=_quantity("s"), default=None,
                   help="detection window (default 100/kappa)")
    p.add_argument("--tau-r", type=_quantity("s"),
                   default=CANONICAL_PULSES["tau_read"])
    p.add_argument("--beta", type=float, default=3.0,
                   help="test amplitude for the convergence check")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        handler = {
            "prepare": cmd_prepare,
            "meanfield": cmd_meanfield,
            "pacs-scan": cmd_pacs_scan,
            "thermal-scan": cmd_thermal_scan,
            "validate": cmd_validate,
        }[args.command]
        return handler(args)
    except PacsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return 2


def cmd_prepare(args) -> int:
    params = _load_params(args)
    drives = DriveParams.at_operating_point(params, P0=args.P0, P1=args.P1)
    fourier = analytic_fourier_solution(params, drives)
    drift, diffusion = build_drift_diffusion(params, fourier)
    v = steady_covariance_lyapunov(drift, diffusion)
    v_spec = steady_covariance_spectral(drift.static, diffusion)
    cross = float(np.max(np.abs(v.matrix - v_spec.matrix)))
    n0 = residual_occupation(v)
    beta = coherent_amplitude_estimate(params, drives)

    report = {
        "params": params.to_dict(),
        "drives": {"P0": args.P0, "P1": args.P1,
                   "omega_l": drives.omega_l, "omega_p": drives.omega_p},
        "fourier": {"a0": fourier.a0, "a1": fourier.a1, "q0": fourier.q0,
                    "q1": fourier.q1, "cooperativity": fourier.cooperativity,
                    "coherent_amplitude": beta},
        "covariance": v.to_dict(),
        "solver_cross_check_max_abs": cross,
        "thermal_occupation": params.n_thermal,
    }
    print(f"<a>_0 = {fourier.a0:.6g}   |<a>_0| = {abs(fourier.a0):.6g}")
    print(f"<a>_1 = {fourier.a1:.6g}   (OMIT-suppressed probe response)")
    print(f"|beta| = {beta:.6g}")
    print(f"n_thermal = {params.n_thermal:.6g}")
    print(f"V_qq = {v.qq:.6f}   V_pp = {v.pp:.6f}   n0 = {n0:.6f}")
    print(f"Lyapunov vs spectral: max|dV| = {cross:.3e}")

    if not args.skip_modulation:
        mod = periodic_modulation(drift, diffusion)
        report["modulation"] = mod.to_dict()
        print(f"variance modulation (peak-to-peak): dV_qq = "
              f"{mod.vqq_peak_to_peak:.3e}, dV_pp = {mod.vpp_peak_to_peak:.3e}"
              f"  [locked after {mod.n_beats} beats]")

    write_json(Path(args.out) / "prepare_report.json", report)
    print(f"report written to {args.out}/prepare_report.json")
    if cross > args.tol:
        print("solver cross-check exceeded tolerance", file=sys.stderr)
        return 1
    return 0


def cmd_meanfield(args) -> int:
    params = _load_params(args)
    drives = DriveParams.at_operating_point(params, P0=args.P0, P1=args.P1)
    traj = integrate_meanfield(params, drives, t_final=args.t_final,
                               rtol=args.rtol, n_samples=args.samples)
    fourier = analytic_fourier_solution(params, drives)
    fit = compare_trajectory_to_fourier(traj, fourier)
    out = Path(args.out)
    traj.to_csv(out / "meanfield_trajectory.csv")
    write_json(out / "meanfield_fit.json", fit.to_dict())
    print(f"integrated {traj.n_steps} steps to t = {traj.t[-1]:.4e} s")
    print(f"harmonic-fit residuals: q {fit.residual_q:.3e}, "
          f"p {fit.residual_p:.3e}, a {fit.residual_a:.3e}")
    print(f"counter-rotating remainder |a_-1| = {abs(fit.a_minus1):.4e}")
    print(f"trajectory and fit written to {out}/")
    return 0


def _check_converged(name: str, rows, header) -> bool:
    idx = header.index("converged")
    bad = [row for row in rows if not row[idx]]
    if bad:
        print(f"{name}: {len(bad)} row(s) failed truncation convergence",
              file=sys.stderr)
    return not bad


def cmd_pacs_scan(args) -> int:
    params = _load_params(args)
    z_def, b_def = _default_conversions(params)
    z = args.Z if args.Z is not None else z_def
    b_fig2c = args.B if args.B is not None else b_def
    beta_grid = args.beta_grid if args.beta_grid is not None \
        else figures.DEFAULT_BETA_GRID
    b_list = args.B_list if args.B_list is not None else figures.DEFAULT_B_LIST
    theta_grid = args.theta_grid if args.theta_grid is not None \
        else figures.DEFAULT_THETA_GRID

    print(f"Z = {z:.6f}, B = {b_fig2c:.6f} (write/readout conversions)")
    ok = True
    datasets = (
        ("fig2a", figures.fig2a_data(beta_grid, b_list, z, args.nmax)),
        ("fig2b", figures.fig2b_data(beta_grid, b_list, z, math.pi / 2,
                                     args.nmax)),
        ("fig2c", figures.fig2c_data(beta_grid, theta_grid, z, b_fig2c,
                                     args.nmax)),
        ("fig2d", figures.fig2d_data(beta_grid, None, z, math.pi / 2,
                                     args.nmax)),
    )
    for name, (header, rows, meta) in datasets:
        meta["preset"] = args.preset
        figures.write_dataset(args.out, name, header, rows, meta)
        disc = max(row[header.index("discrepancy")] for row in rows)
        print(f"{name}: {len(rows)} rows, max analytic-oracle discrepancy "
              f"{disc:.3e}")
        ok &= _check_converged(name, rows, header)
        ok &= disc < args.tol
    print(f"data written to {args.out}/")
    return 0 if ok else 1


def cmd_thermal_scan(args) -> int:
    params = _load_params(args)
    z_def, b_def = _default_conversions(params)
    z = args.Z if args.Z is not None else z_def
    b = args.B if args.B is not None else b_def
    nbar0_list = args.nbar0_list if args.nbar0_list is not None \
        else figures.DEFAULT_NBAR0_LIST
    if (max(nbar0_list) > an.THERMAL_VALIDITY_NBAR
            or min(nbar0_list) < 0) and not args.force:
        raise ValueError(
            f"nbar0 values outside [0, {an.THERMAL_VALIDITY_NBAR}] are beyond "
            "the two-level truncation validity; pass --force to proceed")
    beta_grid = args.beta_grid if args.beta_grid is not None else None

    ok = True
    for name, data in (
        ("fig3a", figures.fig3a_data(beta_grid, nbar0_list, z, b, args.nmax)),
        ("fig3b", figures.fig3b_data(beta_grid, nbar0_list, z, b,
                                     math.pi / 2, args.nmax)),
    ):
        header, rows, meta = data
        meta["preset"] = args.preset
        figures.write_dataset(args.out, name, header, rows, meta)
        audit = max(row[header.index("audit")] for row in rows)
        print(f"{name}: {len(rows)} rows, max truncation-audit gap {audit:.3g}")
        ok &= _check_converged(name, rows, header)
    print(f"data written to {args.out}/")
    return 0 if ok else 1


def cmd_validate(args) -> int:
    params = _load_params(args)
    checks: list[tuple[str, bool, str]] = []

    tau_pd = args.tau_pd if args.tau_pd is not None else 100.0 / params.kappa
    tau_d = args.tau_d if args.tau_d is not None else 100.0 / params.kappa
    seq = PulseSequence(tau_c=args.tau_c, tau_pd=tau_pd, tau_b=args.tau_b,
                        tau_d=tau_d, tau_r=args.tau_r)
    timing = validate_sequence(seq, params)
    checks.append(("pulse-sequence timing", timing.ok,
                   "; ".join(f"{c.name}: {c.ratio:.3g}" for c in timing.checks)))

    z_def, b_def = _default_conversions(params)
    space = fock.FockSpace(args.nmax)

    # Closed forms against the Fock oracle on a small grid.
    worst = 0.0
    for beta in (0.5, 1.5, 2.5):
        st = fock.pacs_ket(z_def * beta, 1, space)
        for b in (0.1, 0.5):
            out = fock.readout_bogoliubov(st, b)
            worst = max(worst, abs(fock.mandel_Q_numeric(out)
                                   - an.mandel_Q_analytic(z_def * beta, 1, b)))
            for theta in (0.0, math.pi / 2):
                worst = max(worst, abs(
                    fock.quadrature_variance_numeric(out, theta)
                    - an.quadrature_variance_analytic(z_def * beta, b, theta)))
    checks.append(("analytic vs oracle statistics", worst < args.tol,
                   f"max discrepancy {worst:.3e}"))

    # Anti-normal moment identity <(A'A)^2> = <A^2A'^2> - 3<AA'> + 1.
    worst = 0.0
    for st in (fock.coherent(1.2, space), fock.pacs_ket(1.0, 1, space),
               fock.basis(space, 2)):
        n1, n2 = fock._number_stats(st)
        m2 = fock.number_moments(st, 2)
        m1 = fock.number_moments(st, 1)
        worst = max(worst, abs(n2 - (m2 - 3.0 * m1 + 1.0)))
    checks.append(("anti-normal moment identity", worst < 1e-8,
                   f"max deviation {worst:.3e}"))

    # Truncation convergence of the heralded Mandel Q at the test amplitude.
    conv = fock.converged_scalar(
        lambda nm: fock.mandel_Q_numeric(
            an.pacs_readout_oracle(args.beta, z_def, b_def, nm)[0]),
        args.nmax, tol=args.tol)
    checks.append((f"truncation convergence (|beta|={args.beta}, "
                   f"n_max={args.nmax})", conv.converged,
                   f"delta {conv.delta:.3e}"))

    failed = [name for name, ok, _ in checks if not ok]
    for name, ok, detail in checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    if failed:
        print(f"{len(failed)} check(s) failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
