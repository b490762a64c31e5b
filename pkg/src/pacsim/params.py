"""Device parameters, drive configuration and pulse-sequence bookkeeping.

All rates and frequencies are stored internally as angular frequencies in
rad/s.  Constructors and config files accept ordinary frequencies in Hz
(fields named ``*_hz`` hold omega/2pi) and convert on entry.  Powers are in
watts, durations in seconds, temperatures in kelvin.

The default device preset ``simon17`` is a 5.25 GHz photonic-crystal
optomechanical cavity: omega_m/2pi = 5.25 GHz, mechanical quality factor
3.8e5, kappa/2pi = 846 MHz (amplitude decay), g/2pi = sqrt(2) x 869 kHz.
The optical wavelength is not fixed by those numbers; we default to
1550 nm, and only the absolute drive amplitudes (hence the fluctuation
spectra) depend on that choice.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict, field

from scipy.constants import hbar, k as k_B, c as c_light

TWO_PI = 2.0 * math.pi

#: Factor x counts as "much less than" y when x/y is below this ratio.
MUCH_LESS_DEFAULT = 0.1


def thermal_occupation(omega_m: float, temperature: float) -> float:
    """Mean thermal phonon number of a mode at ``omega_m`` (rad/s).

    Bose-Einstein occupation 1/(exp(hbar*omega/kT) - 1); returns 0 at T = 0.
    """
    if omega_m <= 0:
        raise ValueError("omega_m must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        return 0.0
    x = hbar * omega_m / (k_B * temperature)
    return 1.0 / math.expm1(x)


def drive_amplitude(power: float, omega: float, kappa: float) -> float:
    """Drive amplitude E (rad/s) of a laser of ``power`` W at ``omega``.

    |E|^2 = 2*kappa*P/(hbar*omega) for a one-sided cavity with amplitude
    decay rate ``kappa``.
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    return math.sqrt(2.0 * kappa * power / (hbar * omega))


def intracavity_photons(power: float, omega_drive: float, kappa: float,
                        omega_m: float) -> float:
    """Steady intracavity photon number for a pulse detuned by +/- omega_m.

    n = 2*kappa*P / [hbar*omega*(kappa^2 + omega_m^2)]
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    return 2.0 * kappa * power / (hbar * omega_drive * (kappa**2 + omega_m**2))


def effective_coupling(g: float, n_photons: float) -> float:
    """Linearised optomechanical coupling G = g*sqrt(n/2)."""
    if n_photons < 0:
        raise ValueError("n_photons must be non-negative")
    return g * math.sqrt(n_photons / 2.0)


def conversion_factor(kind: str, g_eff: float, tau: float, kappa: float) -> float:
    """Pulse conversion factor exp(-G^2 * tau / kappa), in (0, 1].

    For a blue-detuned write pulse this is the amplitude-shrink factor Z;
    for a red-detuned readout pulse it is the residual B whose complement
    1 - B^2 is the state-swap efficiency.  Both obey the same exponential
    law in the adiabatic (G << kappa) regime.
    """
    if kind not in ("write", "readout"):
        raise ValueError(f"kind must be 'write' or 'readout', got {kind!r}")
    if g_eff <= 0 or tau <= 0 or kappa <= 0:
        raise ValueError("g_eff, tau and kappa must be positive")
    return math.exp(-g_eff**2 * tau / kappa)


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the optomechanical device.

    omega_m, gamma, kappa, g are angular rates in rad/s; ``kappa`` is the
    cavity *amplitude* decay rate.  ``lambda_optical`` fixes the cavity
    resonance omega_c = 2*pi*c/lambda.
    """

    omega_m: float
    gamma: float
    kappa: float
    g: float
    temperature: float = 1.0
    lambda_optical: float = 1550e-9

    def __post_init__(self):
        for name in ("omega_m", "gamma", "kappa", "g", "lambda_optical"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def omega_c(self) -> float:
        """Cavity resonance (rad/s) implied by the optical wavelength."""
        return TWO_PI * c_light / self.lambda_optical

    @property
    def resolved_sideband(self) -> bool:
        """True when kappa < omega_m."""
        return self.kappa < self.omega_m

    @property
    def mechanical_Q(self) -> float:
        return self.omega_m / self.gamma

    @property
    def n_thermal(self) -> float:
        """Mean thermal phonon number at the bath temperature."""
        return thermal_occupation(self.omega_m, self.temperature)

    @classmethod
    def from_frequencies(cls, omega_m_hz, kappa_hz, g_hz, mechanical_Q,
                         temperature=1.0, lambda_optical=1550e-9):
        """Build from ordinary frequencies (Hz, i.e. omega/2pi per field)."""
        omega_m = TWO_PI * omega_m_hz
        return cls(
            omega_m=omega_m,
            gamma=omega_m / mechanical_Q,
            kappa=TWO_PI * kappa_hz,
            g=TWO_PI * g_hz,
            temperature=temperature,
            lambda_optical=lambda_optical,
        )

    @classmethod
    def preset(cls, name: str, **overrides) -> "SystemParams":
        if name not in PRESETS:
            raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
        cfg = dict(PRESETS[name])
        cfg.update(overrides)
        return cls.from_config(cfg)

    @classmethod
    def from_config(cls, cfg: dict) -> "SystemParams":
        """Build from a config mapping (see ``PRESETS['simon17']`` for keys)."""
        return cls.from_frequencies(
            omega_m_hz=cfg["omega_m_hz"],
            kappa_hz=cfg["kappa_hz"],
            g_hz=cfg["g_hz"],
            mechanical_Q=cfg["mechanical_Q"],
            temperature=cfg.get("temperature_K", 1.0),
            lambda_optical=cfg.get("wavelength_m", 1550e-9),
        )

    @classmethod
    def from_json(cls, path) -> "SystemParams":
        with open(path) as fh:
            return cls.from_config(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_c"] = self.omega_c
        d["resolved_sideband"] = self.resolved_sideband
        return d


#: Shipped device presets.  ``*_hz`` fields are ordinary frequencies
#: (omega/2pi); ``mechanical_Q`` = omega_m/gamma.
PRESETS = {
    "simon17": {
        "omega_m_hz": 5.25e9,
        "kappa_hz": 846e6,
        "g_hz": math.sqrt(2.0) * 869e3,
        "mechanical_Q": 3.8e5,
        "temperature_K": 1.0,
        "wavelength_m": 1550e-9,
    },
}


@dataclass(frozen=True)
class DriveParams:
    """Bichromatic drive: strong pump at omega_l, weak probe at omega_p.

    Amplitudes E0, E1 are derived from the powers via
    |E|^2 = 2*kappa*P/(hbar*omega); their phases default to real-positive
    but can be set explicitly.
    """

    P0: float
    P1: float
    omega_l: float
    omega_p: float
    phase0: float = 0.0
    phase1: float = 0.0
    probe_ratio_threshold: float = 0.15

    def __post_init__(self):
        if self.P0 < 0 or self.P1 < 0:
            raise ValueError("drive powers must be non-negative")
        if self.omega_l <= 0 or self.omega_p <= 0:
            raise ValueError("drive frequencies must be positive")
        ratio = self.probe_amplitude_ratio
        if ratio > self.probe_ratio_threshold:
            warnings.warn(
                f"|E1/E0| = {ratio:.3g} exceeds the weak-probe threshold "
                f"{self.probe_ratio_threshold}; truncated-harmonic solutions "
                "may be inaccurate",
                stacklevel=2,
            )

    @property
    def probe_amplitude_ratio(self) -> float:
        """|E1/E0| = sqrt(P1*omega_l / (P0*omega_p)); inf when P0 = 0."""
        if self.P0 == 0:
            return math.inf if self.P1 > 0 else 0.0
        return math.sqrt(self.P1 * self.omega_l / (self.P0 * self.omega_p))

    @property
    def delta(self) -> float:
        """Pump-probe beat frequency omega_p - omega_l (rad/s)."""
        return self.omega_p - self.omega_l

    def detuning(self, params: SystemParams) -> float:
        """Bare pump detuning Delta_0 = omega_c - omega_l (rad/s)."""
        return params.omega_c - self.omega_l

    def amplitudes(self, params: SystemParams) -> tuple[complex, complex]:
        """(E0, E1) in rad/s, with the configured phases applied."""
        e0 = drive_amplitude(self.P0, self.omega_l, params.kappa)
        e1 = drive_amplitude(self.P1, self.omega_p, params.kappa)
        return (e0 * complex(math.cos(self.phase0), math.sin(self.phase0)),
                e1 * complex(math.cos(self.phase1), math.sin(self.phase1)))

    @classmethod
    def at_operating_point(cls, params: SystemParams, P0: float, P1: float,
                           **kwargs) -> "DriveParams":
        """Pump red-detuned by omega_m, probe on cavity resonance."""
        return cls(P0=P0, P1=P1,
                   omega_l=params.omega_c - params.omega_m,
                   omega_p=params.omega_c, **kwargs)


def coherent_amplitude_estimate(params: SystemParams, drives: DriveParams) -> float:
    """Magnitude of the mechanical coherent amplitude set up by the probe.

    |beta| = sqrt(2) * (omega_m/g) * (E1/E0), valid deep in the
    resolved-sideband, large-cooperativity regime.  Since E is
    proportional to sqrt(P) at fixed kappa this reduces to
    sqrt(2)*(omega_m/g)*sqrt(P1/P0) for omega_p ~ omega_l.
    """
    if drives.P0 == 0:
        raise ValueError("undefined for zero pump power (E0 = 0)")
    return math.sqrt(2.0) * (params.omega_m / params.g) * drives.probe_amplitude_ratio


@dataclass(frozen=True)
class PulseSpec:
    """A flat-top write (blue-detuned) or readout (red-detuned) pulse."""

    kind: str
    power: float
    duration: float
    weak_coupling_ratio: float = 0.2

    def __post_init__(self):
        if self.kind not in ("write", "readout"):
            raise ValueError(f"kind must be 'write' or 'readout', got {self.kind!r}")
        if self.power < 0:
            raise ValueError("power must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def carrier_frequency(self, params: SystemParams) -> float:
        """omega_c + omega_m for write pulses, omega_c - omega_m for readout."""
        sign = +1.0 if self.kind == "write" else -1.0
        return params.omega_c + sign * params.omega_m

    def n_photons(self, params: SystemParams) -> float:
        return intracavity_photons(self.power, self.carrier_frequency(params),
                                   params.kappa, params.omega_m)

    def g_eff(self, params: SystemParams) -> float:
        g_eff = effective_coupling(params.g, self.n_photons(params))
        if g_eff > self.weak_coupling_ratio * params.kappa:
            warnings.warn(
                f"G_eff/kappa = {g_eff / params.kappa:.3g} exceeds the "
                f"weak-coupling ratio {self.weak_coupling_ratio}; adiabatic "
                "elimination of the cavity is questionable",
                stacklevel=2,
            )
        return g_eff

    def conversion(self, params: SystemParams) -> float:
        """Z (write) or B (readout) for this pulse on this device."""
        return conversion_factor(self.kind, self.g_eff(params), self.duration,
                                 params.kappa)

    @classmethod
    def from_coupling(cls, kind: str, g_eff: float, duration: float,
                      params: SystemParams, **kwargs) -> "PulseSpec":
        """Pulse with the power chosen to hit a target effective coupling."""
        n = 2.0 * (g_eff / params.g) ** 2
        sign = +1.0 if kind == "write" else -1.0
        omega = params.omega_c + sign * params.omega_m
        power = n * hbar * omega * (params.kappa**2 + params.omega_m**2) / (2.0 * params.kappa)
        return cls(kind=kind, power=power, duration=duration, **kwargs)


@dataclass(frozen=True)
class PulseSequence:
    """Durations of the protocol stages, in order of application.

    tau_c: coherent-state preparation (bichromatic drive on)
    tau_pd: photon-decay wait after the drives are switched off
    tau_b: blue-detuned write pulse
    tau_d: single-photon detection window
    tau_r: red-detuned readout pulse
    """

    tau_c: float
    tau_pd: float
    tau_b: float
    tau_d: float
    tau_r: float

    def __post_init__(self):
        for name in ("tau_c", "tau_pd", "tau_b", "tau_d", "tau_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def post_preparation_total(self) -> float:
        return self.tau_pd + self.tau_b + self.tau_d + self.tau_r


@dataclass(frozen=True)
class TimingCheck:
    """One `x much-less-than y` constraint, reported as the ratio x/y."""

    name: str
    ratio: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.ratio < self.threshold

    @property
    def status(self) -> str:
        return "pass" if self.passed else "warn"


@dataclass(frozen=True)
class TimingReport:
    checks: tuple[TimingCheck, ...]
    threshold: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def verdict(self) -> str:
        return "all timing constraints satisfied" if self.ok else \
            "timing constraint(s) violated"

    def __str__(self) -> str:
        lines = [f"pulse-sequence timing (ratio < {self.threshold:g} required):"]
        for c in self.checks:
            lines.append(f"  [{c.status}] {c.name}: ratio = {c.ratio:.3g}")
        lines.append(self.verdict)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "checks": [
                {"name": c.name, "ratio": c.ratio, "status": c.status}
                for c in self.checks
            ],
            "ok": self.ok,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def validate_sequence(seq: PulseSequence, params: SystemParams,
                      threshold: float = MUCH_LESS_DEFAULT) -> TimingReport:
    """Check the separation-of-timescales constraints of the pulse protocol.

    Requires 1/kappa << tau_pd (cavity photons decay during the wait),
    tau_pd << 1/gamma, and tau_pd + tau_b + tau_d + tau_r << 1/gamma
    (mechanical damping negligible over the conditional stages).  Each
    "<<" is operationalised as ratio < ``threshold``; violations warn
    rather than fail, since the bound is a modelling-accuracy statement.
    """
    inv_kappa = 1.0 / params.kappa
    inv_gamma = 1.0 / params.gamma
    checks = (
        TimingCheck("1/kappa << tau_pd",
                    inv_kappa / seq.tau_pd if seq.tau_pd > 0 else math.inf,
                    threshold),
        TimingCheck("tau_pd << 1/gamma", seq.tau_pd / inv_gamma, threshold),
        TimingCheck("tau_pd + tau_b + tau_d + tau_r << 1/gamma",
                    seq.post_preparation_total / inv_gamma, threshold),
    )
    return TimingReport(checks=checks, threshold=threshold)
