"""Figure-data emitters: detection statistics on parameter grids.

Each emitter returns ``(header, rows, params)`` and ``write_dataset``
writes ``<name>.csv`` plus a ``<name>.json`` sidecar with the fully
resolved parameters.  Every row carries the closed-form value and the
Fock-oracle value with their absolute discrepancy.

Oracle values follow a truncation-convergence protocol: a statistic is
accepted once two evaluations ``_BUMP`` levels apart agree within
``CONV_TOL``; otherwise the truncation auto-escalates (up to
``_MAX_ESCALATION`` extra levels) and the row is flagged non-converged if
agreement is never reached.  The ``n_max_used`` column records the final
truncation.

Column layouts are documented in FORMATS.md.
"""

from __future__ import annotations

import math

import numpy as np

from . import analytics as an
from . import fock
from .io import write_csv, write_sidecar

DEFAULT_BETA_GRID = tuple(np.linspace(0.0, 4.0, 21))
DEFAULT_B_LIST = (0.01, 0.25, 0.5, 0.75)
DEFAULT_THETA_GRID = tuple(np.linspace(0.0, math.pi, 17))
DEFAULT_NBAR0_LIST = (0.0, 0.2, 0.45)

CONV_TOL = 1e-6
_BUMP = 10
_MAX_ESCALATION = 40


def _converged_stats(make_state, evals: dict, n_max: int,
                     tol: float = CONV_TOL):
    """Evaluate statistics with truncation auto-escalation.

    ``make_state(n)`` builds the oracle output at truncation ``n``;
    ``evals`` maps column names to functions of that state.  Returns
    (values, n_used, converged): values from the largest truncation, with
    ``converged`` true once consecutive evaluations agree within ``tol``
    for every statistic.
    """
    n = n_max
    prev = None
    while True:
        state = make_state(n)
        vals = {k: f(state) for k, f in evals.items()}
        if prev is not None and all(abs(vals[k] - prev[k]) <= tol
                                    for k in vals):
            return vals, n, True
        if n >= n_max + _MAX_ESCALATION:
            return vals, n, False
        prev = vals
        n += _BUMP


def _heralded(beta: float, Z: float, B: float):
    return lambda n: an.pacs_readout_oracle(beta, Z, B, n)[0]


def fig2a_data(beta_grid=DEFAULT_BETA_GRID, b_list=DEFAULT_B_LIST,
               Z: float = 0.98, n_max: int = 40):
    """Mandel Q vs |beta| for each readout residual B."""
    header = ("beta", "B", "Q_analytic", "Q_oracle", "discrepancy",
              "n_max_used", "converged")
    rows = []
    for b in b_list:
        b = float(b)
        for beta in beta_grid:
            beta = float(beta)
            vals, n_used, ok = _converged_stats(
                _heralded(beta, Z, b), {"Q": fock.mandel_Q_numeric}, n_max)
            q_an = an.mandel_Q_analytic(Z * beta, 1, b)
            rows.append((beta, b, q_an, vals["Q"], abs(q_an - vals["Q"]),
                         n_used, ok))
    params = {"Z": Z, "B_list": list(map(float, b_list)),
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "mandel_Q"}
    return header, rows, params


def _variance_rows(beta: float, Z: float, b: float, thetas, n_max: int):
    """Oracle variances (4x normalized) for all thetas at one grid point."""
    evals = {f"v{i}": (lambda th: (lambda out:
             4.0 * fock.quadrature_variance_numeric(out, th)))(theta)
             for i, theta in enumerate(thetas)}
    vals, n_used, ok = _converged_stats(_heralded(beta, Z, b), evals, n_max)
    return [vals[f"v{i}"] for i in range(len(thetas))], n_used, ok


def fig2b_data(beta_grid=DEFAULT_BETA_GRID, b_list=DEFAULT_B_LIST,
               Z: float = 0.98, theta: float = math.pi / 2, n_max: int = 40):
    """Normalized variance 4(dx_theta)^2 vs |beta| for each B."""
    header = ("beta", "B", "var4_analytic", "var4_oracle", "discrepancy",
              "n_max_used", "converged")
    rows = []
    for b in b_list:
        b = float(b)
        for beta in beta_grid:
            beta = float(beta)
            (v_or,), n_used, ok = _variance_rows(beta, Z, b, [theta], n_max)
            v_an = 4.0 * an.quadrature_variance_analytic(Z * beta, b, theta)
            rows.append((beta, b, v_an, v_or, abs(v_an - v_or), n_used, ok))
    params = {"Z": Z, "B_list": list(map(float, b_list)), "theta": theta,
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "normalized_variance"}
    return header, rows, params


def fig2c_data(beta_grid=DEFAULT_BETA_GRID, theta_grid=DEFAULT_THETA_GRID,
               Z: float = 0.98, B: float = 0.15, n_max: int = 40):
    """Contour grid of 4(dx_theta)^2 over (|beta|, theta) at fixed B."""
    header = ("beta", "theta", "var4_analytic", "var4_oracle", "discrepancy",
              "n_max_used", "converged")
    rows = []
    for beta in beta_grid:
        beta = float(beta)
        v_ors, n_used, ok = _variance_rows(beta, Z, B, theta_grid, n_max)
        for theta, v_or in zip(theta_grid, v_ors):
            theta = float(theta)
            v_an = 4.0 * an.quadrature_variance_analytic(Z * beta, B, theta)
            rows.append((beta, theta, v_an, v_or, abs(v_an - v_or), n_used,
                         ok))
    params = {"Z": Z, "B": B, "theta_grid": list(map(float, theta_grid)),
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "normalized_variance"}
    return header, rows, params


def fig2d_data(beta_grid=DEFAULT_BETA_GRID, b_grid=None, Z: float = 0.98,
               theta: float = math.pi / 2, n_max: int = 40):
    """Contour grid of 4(dx_theta)^2 over (|beta|, B) at fixed theta."""
    if b_grid is None:
        b_grid = tuple(np.linspace(0.05, 1.0, 10))
    header = ("beta", "B", "var4_analytic", "var4_oracle", "discrepancy",
              "n_max_used", "converged")
    rows = []
    for beta in beta_grid:
        beta = float(beta)
        for b in b_grid:
            b = float(b)
            (v_or,), n_used, ok = _variance_rows(beta, Z, b, [theta], n_max)
            v_an = 4.0 * an.quadrature_variance_analytic(Z * beta, b, theta)
            rows.append((beta, b, v_an, v_or, abs(v_an - v_or), n_used, ok))
    params = {"Z": Z, "theta": theta, "B_grid": list(map(float, b_grid)),
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "normalized_variance"}
    return header, rows, params


def fig3a_data(beta_grid=None, nbar0_list=DEFAULT_NBAR0_LIST, Z: float = 0.98,
               B: float = 0.15, n_max: int = 40):
    """Thermal-residual Mandel statistics over (|beta|, nbar0).

    Columns carry the printed per-branch combination, the Q of the
    truncated conditional state, and the full-ladder oracle Q; ``audit``
    is |truncated-state - oracle| (the two-level truncation error).
    """
    if beta_grid is None:
        beta_grid = tuple(np.linspace(0.0, 4.0, 21))
    header = ("beta", "nbar0", "Q_branch_formula", "Q_truncated_state",
              "Q_oracle", "audit", "n_max_used", "converged")
    rows = []
    for nbar0 in nbar0_list:
        nbar0 = float(nbar0)
        for beta in beta_grid:
            beta = float(beta)
            qf = an.thermal_mandel_Q(beta, Z, B, nbar0, n_max=n_max)
            qt = an.mandel_Q_truncated_state(beta, Z, B, nbar0, n_max=n_max)
            vals, n_used, ok = _converged_stats(
                lambda n: an.thermal_pipeline_oracle(beta, Z, B, nbar0, n)[0],
                {"Q": fock.mandel_Q_numeric}, n_max)
            rows.append((beta, nbar0, qf, qt, vals["Q"],
                         abs(qt - vals["Q"]), n_used, ok))
    params = {"Z": Z, "B": B, "nbar0_list": list(map(float, nbar0_list)),
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "mandel_Q_thermal"}
    return header, rows, params


def fig3b_data(beta_grid=None, nbar0_list=DEFAULT_NBAR0_LIST, Z: float = 0.98,
               B: float = 0.15, theta: float = math.pi / 2, n_max: int = 40):
    """Normalized variance vs |beta| for each residual occupation."""
    if beta_grid is None:
        beta_grid = tuple(np.linspace(0.0, 4.0, 21))
    header = ("beta", "nbar0", "var4_truncated", "var4_oracle", "audit",
              "n_max_used", "converged")
    rows = []
    for nbar0 in nbar0_list:
        nbar0 = float(nbar0)
        for beta in beta_grid:
            beta = float(beta)
            vt = 4.0 * an.thermal_quadrature_variance(beta, Z, B, nbar0,
                                                      theta, n_max=n_max)
            vals, n_used, ok = _converged_stats(
                lambda n: an.thermal_pipeline_oracle(beta, Z, B, nbar0, n)[0],
                {"v": lambda out:
                    4.0 * fock.quadrature_variance_numeric(out, theta)},
                n_max)
            rows.append((beta, nbar0, vt, vals["v"], abs(vt - vals["v"]),
                         n_used, ok))
    params = {"Z": Z, "B": B, "theta": theta,
              "nbar0_list": list(map(float, nbar0_list)),
              "beta_grid": list(map(float, beta_grid)), "n_max": n_max,
              "statistic": "normalized_variance_thermal"}
    return header, rows, params


def write_dataset(out_dir, name: str, header, rows, params) -> tuple:
    """Write ``<out_dir>/<name>.csv`` and its JSON parameter sidecar."""
    from pathlib import Path
    csv_path = Path(out_dir) / f"{name}.csv"
    write_csv(csv_path, header, rows)
    write_sidecar(csv_path, params)
    return csv_path, csv_path.with_suffix(".json")
