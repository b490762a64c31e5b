"""Steady-state quantum fluctuations of the linearised system.

State ordering is u = (dq, dp, dx, dy) with optical quadratures
x = (a + a')/sqrt(2), y = i(a' - a)/sqrt(2).  The linearised drift keeps
all counter-rotating terms; the drive enters through the linearised
couplings G0 = g*<a>0 (static) and G1 = g*<a>1 (modulated at the beat
frequency).  Vacuum corresponds to variance 1/2 per quadrature, so the
residual occupation is (V_qq + V_pp - 1)/2.

Two independent stationary solvers are provided: a Lyapunov solve of
A V + V A^T + D = 0, and a frequency-domain quadrature of
(i w - A)^{-1} D (-i w - A^T)^{-1}.  The weak probe modulation is handled
separately by marching the time-periodic Lyapunov equation to its locked
periodic orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import solve_continuous_lyapunov

from . import _rk
from .errors import ConvergenceError, InstabilityError, StiffnessError
from .meanfield import FourierSolution
from .params import SystemParams

_SQRT2 = math.sqrt(2.0)

#: Symplectic form for (q, p, x, y).
OMEGA_SYMPLECTIC = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])


def _coupling_block(gx: float, gy: float) -> np.ndarray:
    """Drift contribution of a linearised coupling G = gx + i*gy."""
    m = np.zeros((4, 4))
    m[1, 2] = _SQRT2 * gx
    m[1, 3] = _SQRT2 * gy
    m[2, 0] = -_SQRT2 * gy
    m[3, 0] = _SQRT2 * gx
    return m


@dataclass(frozen=True)
class DriftMatrix:
    """Drift A(t) = static + cos/sin blocks oscillating at ``omega_m``.

    The oscillating part carries the complex probe coupling ``g1``;
    A(t) entries follow Gx(t) = Re[G0 + G1 e^{-i w t}] and
    Gy(t) = Im[G0 + G1 e^{-i w t}].
    """

    static: np.ndarray
    g1: complex
    omega_m: float

    @property
    def is_static(self) -> bool:
        return self.g1 == 0

    def cos_part(self) -> np.ndarray:
        return _coupling_block(self.g1.real, self.g1.imag)

    def sin_part(self) -> np.ndarray:
        return _coupling_block(self.g1.imag, -self.g1.real)

    def at_time(self, t: float) -> np.ndarray:
        return (self.static + self.cos_part() * math.cos(self.omega_m * t)
                + self.sin_part() * math.sin(self.omega_m * t))


@dataclass(frozen=True)
class DiffusionMatrix:
    """Symmetrised noise strength; D_pp = gamma(2 nbar + 1), D_xx = D_yy = kappa."""

    matrix: np.ndarray

    @property
    def is_positive_semidefinite(self) -> bool:
        return bool(np.min(np.linalg.eigvalsh(self.matrix)) >= -1e-12)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetrised second moments V_ij = <du_i du_j + du_j du_i>/2."""

    matrix: np.ndarray

    @property
    def qq(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def pp(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def xx(self) -> float:
        return float(self.matrix[2, 2])

    @property
    def yy(self) -> float:
        return float(self.matrix[3, 3])

    def heisenberg_defect(self) -> float:
        """Smallest eigenvalue of V + i*Omega/2 (>= 0 for physical states)."""
        h = self.matrix + 0.5j * OMEGA_SYMPLECTIC
        return float(np.min(np.linalg.eigvalsh(h)))

    def is_physical(self, tol: float = 1e-9) -> bool:
        sym = np.allclose(self.matrix, self.matrix.T, atol=1e-10)
        diag_ok = bool(np.all(np.diag(self.matrix) >= 0.5 - tol))
        return sym and diag_ok and self.heisenberg_defect() >= -tol

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "qq": self.qq, "pp": self.pp,
                "xx": self.xx, "yy": self.yy,
                "residual_occupation": residual_occupation(self)}


def build_drift_diffusion(params: SystemParams, fourier: FourierSolution,
                          ) -> tuple[DriftMatrix, DiffusionMatrix]:
    """Drift/diffusion pair at the operating point (effective detuning omega_m).

    G0 = g*a0 enters the static drift, G1 = g*a1 the oscillating part.  The
    time dependence of the detuning through <q>(t) is neglected, consistent
    with the weak-probe validity of ``fourier``.
    """
    g0 = params.g * fourier.a0
    g1 = params.g * fourier.a1
    delta = params.omega_m
    a = np.array([
        [0.0, params.omega_m, 0.0, 0.0],
        [-params.omega_m, -params.gamma, 0.0, 0.0],
        [0.0, 0.0, -params.kappa, delta],
        [0.0, 0.0, -delta, -params.kappa],
    ])
    a += _coupling_block(g0.real, g0.imag)
    nbar = params.n_thermal
    d = np.diag([0.0, params.gamma * (2.0 * nbar + 1.0), params.kappa,
                 params.kappa])
    return DriftMatrix(static=a, g1=complex(g1), omega_m=params.omega_m), \
        DiffusionMatrix(matrix=d)


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, DriftMatrix):
        return a.static
    return np.asarray(a, dtype=float)


def _as_diffusion(d) -> np.ndarray:
    if isinstance(d, DiffusionMatrix):
        return d.matrix
    return np.asarray(d, dtype=float)


def _require_hurwitz(a: np.ndarray) -> None:
    eigs = np.linalg.eigvals(a)
    if np.max(eigs.real) >= 0:
        raise InstabilityError(tuple(eigs))


def steady_covariance_lyapunov(a, d) -> CovarianceMatrix:
    """Stationary covariance from A V + V A^T + D = 0 (Bartels-Stewart).

    ``a`` may be a DriftMatrix (its static part is used; probe modulation
    is handled by ``periodic_modulation``).  Raises ``InstabilityError``
    when A is not Hurwitz and ``ConvergenceError`` if the residual exceeds
    1e-10 * ||D||.
    """
    a = _as_matrix(a)
    d = _as_diffusion(d)
    _require_hurwitz(a)
    v = solve_continuous_lyapunov(a, -d)
    v = 0.5 * (v + v.T)
    residual = np.linalg.norm(a @ v + v @ a.T + d)
    if residual > 1e-10 * max(np.linalg.norm(d), 1e-300):
        raise ConvergenceError(
            f"Lyapunov residual {residual:.3e} exceeds 1e-10 * ||D||")
    return CovarianceMatrix(matrix=v)


def steady_covariance_spectral(a, d, freq_grid=None, epsabs: float = 1e-9,
                               epsrel: float = 1e-9) -> CovarianceMatrix:
    """Stationary covariance as a frequency integral.

    V = (1/2pi) Int (i w - A)^{-1} D (-i w - A^T)^{-1} dw over the real
    line.  A finite core window (default +/- 20 x the largest eigenvalue
    scale, with breakpoints at every resonance) is integrated adaptively;
    the tails are folded in exactly via the substitution w -> 1/u, so the
    result is not truncated.  ``freq_grid`` may supply explicit breakpoint
    frequencies (rad/s); the window is then max(|freq_grid|) with those
    breakpoints, unless it is a 2-element (wmin, wmax) range.

    Raises ``ConvergenceError`` if the quadrature error estimate exceeds
    the requested tolerance.
    """
    a = _as_matrix(a)
    d = _as_diffusion(d)
    _require_hurwitz(a)
    eye = np.eye(a.shape[0])

    eigs = np.linalg.eigvals(a)
    if freq_grid is None:
        omega_max = 20.0 * float(np.max(np.abs(eigs)))
        points = sorted({0.0} | {s * abs(ev.imag) for ev in eigs for s in (-1, 1)
                         if abs(ev.imag) > 0})
    else:
        freq_grid = np.sort(np.asarray(freq_grid, dtype=float))
        omega_max = float(np.max(np.abs(freq_grid)))
        points = [w for w in freq_grid if abs(w) < omega_max]

    def integrand(w: float) -> np.ndarray:
        x = np.linalg.solve(1j * w * eye - a, d)
        y_t = np.linalg.solve(-1j * w * eye - a, x.T)
        return y_t.T.real.ravel()

    core, core_err = quad_vec(integrand, -omega_max, omega_max,
                              points=points, epsabs=epsabs, epsrel=epsrel,
                              limit=10_000)

    # Exact tails: Int_{W}^{inf} f(w) dw = Int_0^{1/W} f(1/u) du / u^2,
    # and the real part is even in w, so the two tails coincide.
    def tail_integrand(u: float) -> np.ndarray:
        w = 1.0 / u
        return integrand(w) / u**2

    tail, tail_err = quad_vec(tail_integrand, 1e-300, 1.0 / omega_max,
                              epsabs=epsabs, epsrel=epsrel, limit=10_000)

    total_err = (core_err + 2.0 * tail_err) / (2.0 * math.pi)
    v = (core + 2.0 * tail).reshape(a.shape) / (2.0 * math.pi)
    v = 0.5 * (v + v.T)
    scale = max(np.max(np.abs(v)), 1e-300)
    if total_err > 10.0 * max(epsabs, epsrel * scale):
        raise ConvergenceError(
            f"spectral quadrature error estimate {total_err:.3e} exceeds "
            f"the requested tolerance (epsabs={epsabs:g}, epsrel={epsrel:g})")
    return CovarianceMatrix(matrix=v)


@dataclass(frozen=True)
class ModulationReport:
    """Probe-induced periodic modulation of the variances.

    ``vqq_peak_to_peak``/``vpp_peak_to_peak`` are measured over one beat
    period of the locked periodic solution; ``locked`` records whether the
    beat-to-beat change dropped below the lock tolerance before ``t_max``.
    """

    vqq_mean: float
    vpp_mean: float
    vqq_peak_to_peak: float
    vpp_peak_to_peak: float
    locked: bool
    n_beats: int
    t_integrated: float
    times: np.ndarray
    vqq: np.ndarray
    vpp: np.ndarray

    def to_dict(self) -> dict:
        return {
            "vqq_mean": self.vqq_mean,
            "vpp_mean": self.vpp_mean,
            "vqq_peak_to_peak": self.vqq_peak_to_peak,
            "vpp_peak_to_peak": self.vpp_peak_to_peak,
            "locked": self.locked,
            "n_beats": self.n_beats,
            "t_integrated": self.t_integrated,
        }


def periodic_modulation(drift: DriftMatrix, diffusion,
                        t_max: float | None = None, rtol: float = 1e-9,
                        atol: float = 1e-13, lock_tol: float = 1e-10,
                        n_store: int = 256) -> ModulationReport:
    """Variance modulation from the probe's oscillating coupling.

    Integrates dV/dt = A(t) V + V A(t)^T + D from the static steady state
    until the solution is periodic beat-to-beat (relative change below
    ``lock_tol``), then records one beat period.  ``t_max`` caps the march
    at 10/gamma by default; the orbit normally locks after a few photon
    damping times, far earlier.
    """
    a0 = drift.static
    d = _as_diffusion(diffusion)
    _require_hurwitz(a0)
    gamma = -a0[1, 1]
    if t_max is None:
        t_max = 10.0 / gamma

    v0 = steady_covariance_lyapunov(a0, d).matrix
    h0 = 0.01 / max(np.max(np.abs(a0)), drift.omega_m)
    status, locked, n_beats, samples, t_end, _ = \
        _rk.integrate_covariance_periodic_kernel(
            a0, drift.cos_part(), drift.sin_part(), drift.omega_m, d, v0,
            t_max, rtol, atol, h0, lock_tol, n_store)
    if status != 0:
        raise StiffnessError(t_end)

    vqq = samples[:, 0]
    vpp = samples[:, 5]
    period = 2.0 * math.pi / drift.omega_m
    times = t_end - period + (np.arange(n_store) + 1) * period / n_store
    return ModulationReport(
        vqq_mean=float(np.mean(vqq)), vpp_mean=float(np.mean(vpp)),
        vqq_peak_to_peak=float(np.max(vqq) - np.min(vqq)),
        vpp_peak_to_peak=float(np.max(vpp) - np.min(vpp)),
        locked=bool(locked), n_beats=int(n_beats), t_integrated=float(t_end),
        times=times, vqq=vqq.copy(), vpp=vpp.copy())


def residual_occupation(v) -> float:
    """Effective phonon occupation n0 = (V_qq + V_pp - 1)/2."""
    if isinstance(v, CovarianceMatrix):
        return 0.5 * (v.qq + v.pp - 1.0)
    v = np.asarray(v)
    return float(0.5 * (v[0, 0] + v[1, 1] - 1.0))
