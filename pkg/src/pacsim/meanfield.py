"""First-moment dynamics of the bichromatically driven cavity-oscillator pair.

The coupled equations for (<a>, <q>, <p>) are integrated in the frame
rotating at the pump frequency, where the pump appears as a constant drive
E0 and the probe as E1*exp(-i*delta*t) with delta = omega_p - omega_l.
At the red-detuned operating point (delta = Delta_0 = omega_m) the long-time
solution is a small harmonic orbit around a static displacement; its
truncated-harmonic closed form is evaluated by ``analytic_fourier_solution``
and the exact ODE serves as the oracle for it.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _rk
from .errors import InsufficientDataError, StiffnessError
from .params import DriveParams, SystemParams, MUCH_LESS_DEFAULT

#: Relative width of the accepted window around the operating point
#: delta = Delta_0 = omega_m (the static optomechanical shift g<q>0/omega_m
#: is ~1e-4 here and is absorbed into this tolerance).
OPERATING_POINT_RTOL = 1e-3


@dataclass(frozen=True)
class MeanFieldState:
    """First moments at one instant (dimensionless quadratures)."""

    t: float
    q_avg: float
    p_avg: float
    a_avg: complex


@dataclass(frozen=True)
class FourierSolution:
    """Truncated-harmonic steady state at the red-detuned operating point.

    <a>(t) ~ a0 + a1*exp(-i*delta*t);  <q>(t) = q0 + 2*Re[q1]*cos(delta*t)
    + 2*Im[q1]*sin(delta*t), and the same for <p> with p1 = -i*q1 (no DC
    momentum component).
    """

    a0: complex
    a1: complex
    q0: float
    q1: complex
    p1: complex
    delta: float
    cooperativity: float
    probe_backaction_ratio: float

    @property
    def coherent_amplitude(self) -> float:
        """|beta| = sqrt(2)|q1| of the mechanical coherent orbit."""
        return math.sqrt(2.0) * abs(self.q1)

    def q_of_t(self, t):
        return (self.q0 + 2.0 * self.q1.real * np.cos(self.delta * t)
                + 2.0 * self.q1.imag * np.sin(self.delta * t))

    def p_of_t(self, t):
        return (2.0 * self.p1.real * np.cos(self.delta * t)
                + 2.0 * self.p1.imag * np.sin(self.delta * t))

    def a_of_t(self, t):
        return self.a0 + self.a1 * np.exp(-1j * self.delta * np.asarray(t))


def analytic_fourier_solution(params: SystemParams, drives: DriveParams,
                              allow_out_of_regime: bool = False) -> FourierSolution:
    """Closed-form harmonic steady state, truncated at the first sideband.

    Valid for a weak probe (|E1| << |E0|) at the operating point
    delta = omega_m, Delta = omega_m:

        a0 = E0 / (kappa + i*omega_m)
        a1 = E1 / (kappa + (g^2/gamma)|a0|^2)
        q0 = (g/omega_m)(|a0|^2 + |a1|^2)
        q1 = (i*g/gamma) * conj(a0) * a1,   p1 = -i*q1

    Raises ValueError off the operating point unless
    ``allow_out_of_regime`` is set.
    """
    delta = drives.delta
    delta0 = drives.detuning(params)
    if not allow_out_of_regime:
        for name, value in (("delta", delta), ("Delta_0", delta0)):
            if abs(value - params.omega_m) > OPERATING_POINT_RTOL * params.omega_m:
                raise ValueError(
                    f"{name} = {value:.6e} rad/s is off the operating point "
                    f"omega_m = {params.omega_m:.6e} rad/s; pass "
                    "allow_out_of_regime=True to evaluate anyway")

    e0, e1 = drives.amplitudes(params)
    kappa, g, gamma, omega_m = params.kappa, params.g, params.gamma, params.omega_m

    a0 = e0 / (kappa + 1j * omega_m)
    abs_a0_sq = abs(a0) ** 2
    a1 = e1 / (kappa + (g**2 / gamma) * abs_a0_sq)
    q0 = (g / omega_m) * (abs_a0_sq + abs(a1) ** 2)
    q1 = (1j * g / gamma) * np.conj(a0) * a1
    p1 = -1j * q1

    cooperativity = (g**2) * abs_a0_sq / (kappa * gamma)
    backaction = (g * abs(a1)) ** 2 / (kappa * gamma)
    if backaction > MUCH_LESS_DEFAULT:
        warnings.warn(
            f"probe backaction G1^2/(kappa*gamma) = {backaction:.3g} is not "
            "small; the pump response a0 formula degrades", stacklevel=2)
    return FourierSolution(a0=complex(a0), a1=complex(a1), q0=float(q0),
                           q1=complex(q1), p1=complex(p1), delta=delta,
                           cooperativity=float(cooperativity),
                           probe_backaction_ratio=float(backaction))


class MeanFieldTrajectory:
    """Sampled solution of the first-moment equations.

    Samples cover ``[sample_start, t_final]``; the transient before the
    sample window is integrated but not stored.
    """

    def __init__(self, t, q, p, a, params, drives, rtol, n_steps):
        self.t = t
        self.q = q
        self.p = p
        self.a = a
        self.params = params
        self.drives = drives
        self.rtol = rtol
        self.n_steps = n_steps

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> MeanFieldState:
        return MeanFieldState(t=float(self.t[i]), q_avg=float(self.q[i]),
                              p_avg=float(self.p[i]), a_avg=complex(self.a[i]))

    @property
    def final_state(self) -> MeanFieldState:
        return self.state(len(self.t) - 1)

    def to_csv(self, path) -> None:
        """Write samples as CSV with header (t, q, p, Re a, Im a)."""
        from .io import write_csv
        rows = zip(self.t, self.q, self.p, self.a.real, self.a.imag)
        write_csv(path, ("t", "q", "p", "re_a", "im_a"), rows)


def integrate_meanfield(params: SystemParams, drives: DriveParams,
                        t_final: float | None = None, rtol: float = 1e-9,
                        atol: float = 1e-12, n_samples: int = 2048,
                        sample_start: float | None = None,
                        initial_state: MeanFieldState | None = None,
                        ) -> MeanFieldTrajectory:
    """Integrate the nonlinear first-moment equations from t = 0.

    Adaptive embedded Runge-Kutta with relative tolerance ``rtol``;
    the system is mildly stiff (kappa, omega_m >> gamma) but remains
    tractable for an explicit method because every fast scale is
    oscillatory or strongly damped.  ``t_final`` defaults to 20/gamma,
    comfortably past the slowest transient.  ``sample_start`` defaults to
    eight mechanical periods before ``t_final``, which is the window the
    harmonic-fit diagnostics need; pass 0.0 to record the full transient.

    Raises ``StiffnessError`` if the step size underflows, naming the
    offending time.
    """
    if t_final is None:
        t_final = 20.0 / params.gamma
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    if sample_start is None:
        sample_start = max(0.0, t_final - 8.0 * (2.0 * math.pi / params.omega_m))
    if not 0.0 <= sample_start < t_final:
        raise ValueError("sample_start must lie in [0, t_final)")

    e0, e1 = drives.amplitudes(params)
    delta0 = drives.detuning(params)
    pars = np.array([params.kappa, delta0, params.gamma, params.omega_m,
                     params.g, e0.real, e0.imag, e1.real, e1.imag,
                     drives.delta])
    if initial_state is None:
        y0 = np.zeros(4)
    else:
        y0 = np.array([initial_state.a_avg.real, initial_state.a_avg.imag,
                       initial_state.q_avg, initial_state.p_avg])

    ts = np.linspace(sample_start, t_final, n_samples)
    h0 = 0.01 / max(params.omega_m, params.kappa, abs(delta0),
                    abs(drives.delta), 1.0 / t_final)
    status, out, t_reached, n_steps = _rk.integrate_meanfield_kernel(
        pars, y0, ts, rtol, atol, h0)
    if status == 1:
        raise StiffnessError(t_reached)
    if status == 2:
        raise StiffnessError(t_reached, f"step budget exhausted at t = {t_reached:.3e} s")
    if not np.all(np.isfinite(out)):
        raise StiffnessError(t_reached, "non-finite state encountered")

    return MeanFieldTrajectory(t=ts, q=out[:, 2], p=out[:, 3],
                               a=out[:, 0] + 1j * out[:, 1],
                               params=params, drives=drives, rtol=rtol,
                               n_steps=n_steps)


@dataclass(frozen=True)
class FourierFitReport:
    """Least-squares harmonic decomposition of a trajectory tail.

    ``fitted_*`` come from regressing the samples on {1, cos, sin} at the
    beat frequency over an integer number of periods; ``residual_*`` are
    RMS deviations from the *analytic* harmonic solution, relative to a
    common mechanical (optical) signal scale.  ``a_minus1`` estimates the
    counter-rotating optical component the truncated solution drops.
    """

    fitted_q0: float
    fitted_q1: complex
    fitted_p0: float
    fitted_p1: complex
    fitted_a0: complex
    fitted_a1: complex
    a_minus1: complex
    residual_q: float
    residual_p: float
    residual_a: float
    n_periods: int
    analytic: FourierSolution

    @property
    def residual(self) -> float:
        """Overall relative RMS residual (worst component)."""
        return max(self.residual_q, self.residual_p, self.residual_a)

    def discrepancies(self) -> dict:
        """Fitted-minus-analytic coefficient magnitudes."""
        return {
            "q0": abs(self.fitted_q0 - self.analytic.q0),
            "q1": abs(self.fitted_q1 - self.analytic.q1),
            "p1": abs(self.fitted_p1 - self.analytic.p1),
            "a0": abs(self.fitted_a0 - self.analytic.a0),
            "a1": abs(self.fitted_a1 - self.analytic.a1),
        }

    def to_dict(self) -> dict:
        return {
            "fitted": {
                "q0": self.fitted_q0,
                "q1": [self.fitted_q1.real, self.fitted_q1.imag],
                "p0": self.fitted_p0,
                "p1": [self.fitted_p1.real, self.fitted_p1.imag],
                "a0": [self.fitted_a0.real, self.fitted_a0.imag],
                "a1": [self.fitted_a1.real, self.fitted_a1.imag],
                "a_minus1": [self.a_minus1.real, self.a_minus1.imag],
            },
            "residuals": {"q": self.residual_q, "p": self.residual_p,
                          "a": self.residual_a, "overall": self.residual},
            "discrepancies": self.discrepancies(),
            "n_periods": self.n_periods,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def compare_trajectory_to_fourier(traj: MeanFieldTrajectory,
                                  fourier: FourierSolution) -> FourierFitReport:
    """Fit the trajectory tail to the harmonic form and compare.

    Uses the largest integer number of beat periods that fits inside the
    sample window (avoids spectral leakage).  Requires at least two
    periods, else ``InsufficientDataError``.
    """
    omega = fourier.delta
    period = 2.0 * math.pi / omega
    span = traj.t[-1] - traj.t[0]
    n_periods = int(math.floor(span / period + 1e-9))
    if n_periods < 2:
        raise InsufficientDataError(
            f"sample window spans {span / period:.2f} beat periods; "
            "need at least 2 for a leakage-free harmonic fit")

    t0 = traj.t[-1] - n_periods * period
    mask = traj.t >= t0 - 1e-12 * traj.t[-1]
    t = traj.t[mask]
    if t.size < 16:
        raise InsufficientDataError("fewer than 16 samples in the fit window")
    q = traj.q[mask]
    p = traj.p[mask]
    a = traj.a[mask]

    cos_t = np.cos(omega * t)
    sin_t = np.sin(omega * t)
    design = np.column_stack([np.ones_like(t), cos_t, sin_t])

    def fit_real(x):
        coef, *_ = np.linalg.lstsq(design, x, rcond=None)
        return coef  # (dc, cos, sin)

    cq = fit_real(q)
    cp = fit_real(p)
    fitted_q1 = 0.5 * (cq[1] + 1j * cq[2])
    fitted_p1 = 0.5 * (cp[1] + 1j * cp[2])

    # Complex fit of <a> on {1, e^{-iwt}, e^{+iwt}}; the + component is the
    # counter-rotating remainder the harmonic truncation neglects.
    design_a = np.column_stack([np.ones_like(t), np.exp(-1j * omega * t),
                                np.exp(1j * omega * t)])
    ca, *_ = np.linalg.lstsq(design_a, a, rcond=None)

    def rms(x):
        return math.sqrt(float(np.mean(np.abs(x) ** 2)))

    q_model = fourier.q_of_t(t)
    p_model = fourier.p_of_t(t)
    a_model = fourier.a_of_t(t)
    mech_scale = max(rms(q_model), rms(p_model), 1e-300)
    opt_scale = max(rms(a_model), 1e-300)

    return FourierFitReport(
        fitted_q0=float(cq[0]), fitted_q1=complex(fitted_q1),
        fitted_p0=float(cp[0]), fitted_p1=complex(fitted_p1),
        fitted_a0=complex(ca[0]), fitted_a1=complex(ca[1]),
        a_minus1=complex(ca[2]),
        residual_q=rms(q - q_model) / mech_scale,
        residual_p=rms(p - p_model) / mech_scale,
        residual_a=rms(a - a_model) / opt_scale,
        n_periods=n_periods,
        analytic=fourier,
    )
