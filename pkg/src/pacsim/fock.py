"""Exact truncated-Fock-space engine for the pulsed protocol.

This is the brute-force oracle behind every closed-form result in
``analytics``: states are explicit amplitude vectors / density matrices on
|0..n_max> per mode, and the pulses act as explicit (sparse) operators.

Conventions
-----------
* Two-mode states order the *optical* temporal mode first: basis index
  ``n_opt * (n_max + 1) + n_mech``.
* The write pulse is the two-mode-squeeze propagator in its normal-ordered
  factorised form  U = exp(i*mu*A'b') * Z^(1+N_A+N_b) * exp(i*mu*A*b)
  with mu = sqrt(1 - Z^2), identical to exp(i*r*(A'b' + A*b)) with
  r = arccosh(1/Z).  (The lowering factor's phase is fixed by unitarity;
  it acts trivially on every cavity-vacuum input either way.)  The readout
  pulse is the beamsplitter A -> B*A + i*sqrt(1-B^2)*b.
* Quadratures use x_theta = (A e^{i theta} + A' e^{-i theta})/2, so the
  vacuum variance is 1/4.
* Conditional branches may be sub-normalised; conditioning operations
  return a normalised state together with the branch probability.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm, sqrtm
from scipy.sparse.linalg import expm_multiply

from .errors import ConditioningError, TruncationError, UndefinedStatisticError

_SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class FockSpace:
    """Truncated bosonic Hilbert space: levels |0..n_max> per mode."""

    n_max: int
    modes: int = 1

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if self.modes not in (1, 2):
            raise ValueError("only 1- or 2-mode spaces are supported")

    @property
    def dim(self) -> int:
        """Per-mode dimension n_max + 1."""
        return self.n_max + 1

    @property
    def total_dim(self) -> int:
        return self.dim ** self.modes

    def two_mode(self) -> "FockSpace":
        return FockSpace(self.n_max, 2)

    def single(self) -> "FockSpace":
        return FockSpace(self.n_max, 1)


def destroy(space: FockSpace) -> np.ndarray:
    """Single-mode annihilation operator (dense)."""
    d = space.dim
    a = np.zeros((d, d))
    ns = np.arange(1, d)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def number_op(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=float))


def pair_lower(space: FockSpace) -> sp.csr_matrix:
    """A*b on the two-mode space (annihilates one quantum in each mode)."""
    a = sp.csr_matrix(destroy(space.single()))
    return sp.kron(a, a, format="csr")


def exchange_generator(space: FockSpace) -> sp.csr_matrix:
    """A'b + Ab' (beamsplitter generator) on the two-mode space."""
    a = sp.csr_matrix(destroy(space.single()))
    return (sp.kron(a.conj().T, a) + sp.kron(a, a.conj().T)).tocsr()


@dataclass
class KetState:
    """Pure state amplitudes; sub-normalised kets record branch weights."""

    data: np.ndarray
    space: FockSpace

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.space.total_dim,):
            raise ValueError(
                f"amplitude vector has length {self.data.shape}, expected "
                f"{self.space.total_dim}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> "KetState":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalise the zero vector")
        return KetState(self.data / n, self.space)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.data, self.data.conj()), self.space)

    def populations(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def to_json(self, **kwargs) -> str:
        return json.dumps({
            "kind": "ket", "n_max": self.space.n_max,
            "modes": self.space.modes,
            "re": self.data.real.tolist(), "im": self.data.imag.tolist(),
        }, **kwargs)


@dataclass
class DensityOperator:
    """Hermitian state matrix; trace may be < 1 for conditional branches."""

    data: np.ndarray
    space: FockSpace

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        d = self.space.total_dim
        if self.data.shape != (d, d):
            raise ValueError(f"matrix shape {self.data.shape}, expected {(d, d)}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def normalized(self) -> "DensityOperator":
        tr = self.trace
        if tr <= 0:
            raise ValueError("cannot normalise a non-positive-trace operator")
        return DensityOperator(self.data / tr, self.space)

    def validate(self, hermit_tol: float = 1e-12, psd_tol: float = 1e-9) -> None:
        """Check Hermiticity, trace in (0, 1] and positivity."""
        scale = max(np.max(np.abs(self.data)), 1e-300)
        if np.max(np.abs(self.data - self.data.conj().T)) > hermit_tol * scale:
            raise ValueError("matrix is not Hermitian within tolerance")
        tr = self.trace
        if not 0.0 < tr <= 1.0 + 1e-9:
            raise ValueError(f"trace {tr} outside (0, 1]")
        if np.min(np.linalg.eigvalsh(self.data)) < -psd_tol:
            raise ValueError("matrix has a negative eigenvalue beyond tolerance")

    def populations(self) -> np.ndarray:
        return np.diag(self.data).real

    def to_json(self, **kwargs) -> str:
        return json.dumps({
            "kind": "density", "n_max": self.space.n_max,
            "modes": self.space.modes,
            "re": self.data.real.tolist(), "im": self.data.imag.tolist(),
        }, **kwargs)


State = KetState | DensityOperator


def vacuum(space: FockSpace) -> KetState:
    v = np.zeros(space.total_dim, dtype=complex)
    v[0] = 1.0
    return KetState(v, space)


def basis(space: FockSpace, *ns: int) -> KetState:
    """Fock basis state |n> or |n_opt, n_mech>."""
    if len(ns) != space.modes:
        raise ValueError(f"expected {space.modes} indices, got {len(ns)}")
    idx = 0
    for n in ns:
        if not 0 <= n <= space.n_max:
            raise ValueError(f"level {n} outside 0..{space.n_max}")
        idx = idx * space.dim + n
    v = np.zeros(space.total_dim, dtype=complex)
    v[idx] = 1.0
    return KetState(v, space)


def displacement(beta: complex, space: FockSpace) -> np.ndarray:
    """D(beta) = exp(beta b' - beta* b) on the truncated single-mode space."""
    if space.modes != 1:
        raise ValueError("displacement acts on a single mode")
    if abs(beta) ** 2 > space.n_max / 4:
        warnings.warn(
            f"|beta|^2 = {abs(beta)**2:.3g} is large for n_max = "
            f"{space.n_max}; displaced states may hit the truncation",
            stacklevel=2)
    b = destroy(space)
    return expm(beta * b.conj().T - np.conj(beta) * b)


def coherent(beta: complex, space: FockSpace) -> KetState:
    """Coherent state D(beta)|0>."""
    return KetState(displacement(beta, space)[:, 0], space)


def pacs_ket(alpha: complex, m: int, space: FockSpace,
             normalized: bool = True) -> KetState:
    """m-quantum-added coherent state b'^m |alpha> (normalised by default)."""
    if m < 0:
        raise ValueError("m must be non-negative")
    adag = destroy(space).conj().T
    v = coherent(alpha, space).data
    for _ in range(m):
        v = adag @ v
    ket = KetState(v, space)
    return ket.normalized() if normalized else ket


def thermal_coherent_state(beta: complex, nbar0: float, space: FockSpace,
                           weight_cut: float = 1e-10) -> DensityOperator:
    """Displaced thermal state sum_n (1-s) s^n D(beta)|n><n|D'(beta).

    The geometric series is truncated once the retained weight exceeds
    1 - ``weight_cut`` (and at n_max); the result is not renormalised, so
    its trace is 1 up to the dropped tail.
    """
    if nbar0 < 0:
        raise ValueError("nbar0 must be non-negative")
    if space.modes != 1:
        raise ValueError("thermal_coherent_state builds a single-mode state")
    s = nbar0 / (1.0 + nbar0)
    weights = []
    total = 0.0
    n = 0
    while total <= 1.0 - weight_cut and n <= space.n_max:
        w = (1.0 - s) * s**n
        weights.append(w)
        total += w
        n += 1
    w = np.array(weights)
    d = displacement(beta, space)
    cols = d[:, : len(w)]
    rho = (cols * w) @ cols.conj().T
    return DensityOperator(rho, space)


def mean_number(state: State) -> float:
    ns = np.arange(state.space.dim ** state.space.modes)
    if state.space.modes != 1:
        raise ValueError("mean_number expects a single-mode state")
    return float(np.dot(state.populations(), ns).real)


def write_pulse_propagator(Z: float, space: FockSpace) -> np.ndarray:
    """Write-pulse propagator (dense) on the two-mode space.

    Normal-ordered factorisation of the effective two-mode squeeze built
    up while the blue-detuned pulse is on:

        U = exp(i*mu*A'b') * Z^(1 + A'A + b'b) * exp(i*mu*A*b),

    mu = sqrt(1 - Z^2).  Acting on |0>_opt |beta>_mech this creates
    photon-phonon pairs with geometric amplitudes while shrinking the
    coherent amplitude to Z*beta.  Equivalent to the direct exponential
    exp(i*r*(A'b' + A*b)) with squeeze parameter r = arccosh(1/Z).
    """
    space2 = space.two_mode()
    u = np.eye(space2.total_dim, dtype=complex)
    return _apply_write_factors(u, Z, space2)


def apply_write_pulse(state: KetState, Z: float) -> KetState:
    """Write-pulse propagator applied to a two-mode ket (matrix-free)."""
    if state.space.modes != 2:
        raise ValueError("apply_write_pulse expects a two-mode ket")
    out = _apply_write_factors(state.data.copy(), Z, state.space)
    return KetState(out, state.space)


def _apply_write_factors(target: np.ndarray, Z: float,
                         space2: FockSpace) -> np.ndarray:
    if not 0.0 < Z <= 1.0:
        raise ValueError("Z must lie in (0, 1]")
    if Z == 1.0:
        return target
    mu = math.sqrt(1.0 - Z * Z)
    ab = pair_lower(space2)
    ab_dag = ab.conj().T.tocsr()
    d = space2.dim

    # exp(i*mu*A*b): nilpotent on the truncated space, series is exact.
    out = target.copy()
    term = target
    for k in range(1, space2.n_max + 1):
        term = (1j * mu / k) * (ab @ term)
        out += term
        if np.max(np.abs(term)) < 1e-18:
            break

    # Z^(1 + N_A + N_b): diagonal scaling.
    ntot = (np.arange(d)[:, None] + np.arange(d)[None, :]).ravel()
    scale = Z ** (1.0 + ntot)
    out = scale[:, None] * out if out.ndim == 2 else scale * out

    # exp(+i*mu*A'b'): raising series, truncated by the space itself.
    acc = out.copy()
    term = out
    for k in range(1, space2.n_max + 1):
        term = (1j * mu / k) * (ab_dag @ term)
        acc += term
        if np.max(np.abs(term)) < 1e-18:
            break
    return acc


def write_and_herald(state: State, Z: float) -> tuple[State, float]:
    """Write pulse on the mechanical state, then a single-photon click.

    ``state`` is the single-mode mechanical input; an optical vacuum is
    attached, the write propagator applied, and the optical mode projected
    onto |1>.  Returns the normalised conditional mechanical state and the
    click probability.
    """
    space2 = state.space.two_mode()
    if isinstance(state, KetState):
        psi = np.kron(basis(space2.single(), 0).data, state.data)
        evolved = apply_write_pulse(KetState(psi, space2), Z)
        return condition_on_single_photon(evolved)
    vals, vecs = np.linalg.eigh(state.data)
    d = state.space.dim
    rho = np.zeros((d, d), dtype=complex)
    prob = 0.0
    for lam, vec in zip(vals, vecs.T):
        if lam < 1e-14:
            continue
        psi = np.zeros(space2.total_dim, dtype=complex)
        psi[:d] = vec  # optical vacuum block
        branch = _apply_write_factors(psi, Z, space2).reshape(d, d)[1, :]
        rho += lam * np.outer(branch, branch.conj())
        prob += lam * float(np.vdot(branch, branch).real)
    if prob < 1e-14:
        raise ConditioningError("single-photon branch has zero probability")
    return DensityOperator(rho / prob, state.space), prob


def condition_on_single_photon(state: State) -> tuple[State, float]:
    """Project the optical mode of a two-mode state onto |1>.

    Returns the *normalised* reduced mechanical state and the detection
    probability (the pre-normalisation weight of the branch).  Raises
    ``ConditioningError`` below probability 1e-14.
    """
    if state.space.modes != 2:
        raise ValueError("conditioning expects a two-mode state")
    d = state.space.dim
    mech_space = state.space.single()
    if isinstance(state, KetState):
        branch = state.data.reshape(d, d)[1, :]
        prob = float(np.vdot(branch, branch).real)
        if prob < 1e-14:
            raise ConditioningError("single-photon branch has zero probability")
        return KetState(branch / math.sqrt(prob), mech_space), prob
    block = state.data.reshape(d, d, d, d)[1, :, 1, :]
    prob = float(np.trace(block).real)
    if prob < 1e-14:
        raise ConditioningError("single-photon branch has zero probability")
    return DensityOperator(block / prob, mech_space), prob


def readout_bogoliubov(mech_state: State, B: float,
                       space: FockSpace | None = None) -> DensityOperator:
    """Swap the mechanical state onto the optical output temporal mode.

    Implements A_out = B*A_in + i*sqrt(1-B^2)*b with the input temporal
    mode in vacuum: a beamsplitter of angle arccos(B) acts on
    (vacuum, mech) and the mechanical mode is traced out.  B -> 0 is a
    perfect swap (up to the i phase); B = 1 returns vacuum.
    """
    if not 0.0 < B <= 1.0:
        raise ValueError("B must lie in (0, 1]")
    if space is None:
        space = mech_state.space
    if mech_state.space.modes != 1:
        raise ValueError("readout expects a single-mode mechanical state")
    d = space.dim
    space2 = space.two_mode()
    theta = math.acos(B)

    if isinstance(mech_state, KetState):
        vecs = mech_state.data[:, None]
        weights = np.array([1.0])
    else:
        vals, eigvecs = np.linalg.eigh(mech_state.data)
        keep = vals > 1e-14
        vecs = eigvecs[:, keep]
        weights = vals[keep]

    stacked = np.zeros((space2.total_dim, vecs.shape[1]), dtype=complex)
    stacked[:d, :] = vecs  # optical vacuum block (n_opt = 0)
    if theta != 0.0:
        gen = 1j * theta * exchange_generator(space2)
        stacked = expm_multiply(gen.tocsc(), stacked)
    rho = np.zeros((d, d), dtype=complex)
    for w, col in zip(weights, stacked.T):
        g = col.reshape(d, d)
        rho += w * (g @ g.conj().T)
    return DensityOperator(rho, space)


def _require_normalized(state: State) -> None:
    weight = state.norm**2 if isinstance(state, KetState) else state.trace
    if abs(weight - 1.0) > 1e-8:
        raise ValueError(
            f"state weight {weight:.3e} is not 1; normalise before computing "
            "statistics")


def _top_occupied(state: State) -> int:
    pops = state.populations()
    occupied = np.nonzero(pops > _SUPPORT_TOL)[0]
    return int(occupied[-1]) if occupied.size else 0


def number_moments(state: State, n: int) -> float:
    """Anti-normally ordered moment <b^n b'^n> of a single-mode state."""
    if state.space.modes != 1:
        raise ValueError("number_moments expects a single-mode state")
    if n < 0:
        raise ValueError("n must be non-negative")
    _require_normalized(state)
    if _top_occupied(state) + n > state.space.n_max:
        raise TruncationError(
            f"raising {n} quanta from level {_top_occupied(state)} exceeds "
            f"n_max = {state.space.n_max}")
    adag = destroy(state.space).conj().T
    if isinstance(state, KetState):
        v = state.data
        for _ in range(n):
            v = adag @ v
        return float(np.vdot(v, v).real)
    m = state.data
    for _ in range(n):
        m = adag @ m @ adag.conj().T
    return float(np.trace(m).real)


def _number_stats(state: State) -> tuple[float, float]:
    pops = state.populations()
    ns = np.arange(pops.size)
    return float(np.dot(pops, ns)), float(np.dot(pops, ns.astype(float) ** 2))


def mandel_Q_numeric(state: State) -> float:
    """Mandel Q = (<n^2> - <n>^2)/<n> - 1 from the number distribution."""
    if state.space.modes != 1:
        raise ValueError("mandel_Q_numeric expects a single-mode state")
    _require_normalized(state)
    n1, n2 = _number_stats(state)
    if n1 < 1e-14:
        raise UndefinedStatisticError("Mandel Q undefined at <n> = 0")
    return (n2 - n1**2) / n1 - 1.0


def field_moments(state: State) -> tuple[complex, complex, float]:
    """(<A>, <A^2>, <A'A>) of a single-mode state."""
    a = destroy(state.space)
    if isinstance(state, KetState):
        v = state.data
        av = a @ v
        return (complex(np.vdot(v, av)), complex(np.vdot(v, a @ av)),
                float(np.vdot(av, av).real))
    rho = state.data
    m1 = complex(np.trace(a @ rho))
    m2 = complex(np.trace(a @ a @ rho))
    n = float(np.trace(a.conj().T @ a @ rho).real)
    return m1, m2, n


def quadrature_variance_numeric(state: State, theta: float) -> float:
    """Variance of x_theta = (A e^{i theta} + A' e^{-i theta})/2.

    Vacuum gives 1/4; values below certify quadrature squeezing.
    """
    _require_normalized(state)
    m1, m2, n = field_moments(state)
    phase2 = complex(math.cos(2 * theta), math.sin(2 * theta))
    phase1 = complex(math.cos(theta), math.sin(theta))
    x_mean = (phase1 * m1).real
    x2_mean = (2.0 * (phase2 * m2).real + 1.0 + 2.0 * n) / 4.0
    return x2_mean - x_mean**2


def rotate_phase(state: State, phi: float) -> State:
    """Phase-space rotation exp(i*phi*n): |alpha> -> |alpha e^{i phi}>."""
    if state.space.modes != 1:
        raise ValueError("rotate_phase expects a single-mode state")
    r = np.exp(1j * phi * np.arange(state.space.dim))
    if isinstance(state, KetState):
        return KetState(r * state.data, state.space)
    return DensityOperator(r[:, None] * state.data * r.conj()[None, :],
                           state.space)


def fidelity(a: State, b: State) -> float:
    """State fidelity (squared-overlap convention)."""
    if isinstance(a, KetState) and isinstance(b, KetState):
        return float(abs(np.vdot(a.data, b.data)) ** 2)
    if isinstance(a, KetState):
        return float(np.vdot(a.data, b.data @ a.data).real)
    if isinstance(b, KetState):
        return fidelity(b, a)
    ra = sqrtm(a.data)
    inner = sqrtm(ra @ b.data @ ra)
    return float(np.trace(inner).real ** 2)


@dataclass(frozen=True)
class ConvergenceCheck:
    """Scalar recomputed at a larger truncation to certify convergence."""

    value: float
    value_bumped: float
    tol: float

    @property
    def delta(self) -> float:
        return abs(self.value - self.value_bumped)

    @property
    def converged(self) -> bool:
        return self.delta <= self.tol


def converged_scalar(fn, n_max: int, bump: int = 10,
                     tol: float = 1e-6) -> ConvergenceCheck:
    """Evaluate ``fn(n_max)`` and ``fn(n_max + bump)`` and compare.

    ``fn`` maps a truncation level to a scalar; results differing by more
    than ``tol`` flag the value as non-converged.
    """
    return ConvergenceCheck(value=float(fn(n_max)),
                            value_bumped=float(fn(n_max + bump)), tol=tol)
