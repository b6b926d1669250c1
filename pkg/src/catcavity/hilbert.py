"""Finite-dimensional Hilbert-space algebra for one cavity mode coupled to a
register of two-level atoms.

Conventions used throughout the package:

* Fock space is truncated at ``n_max`` (dimension ``n_max + 1``).
* Atom basis order is ``(ground, excited)``; lowering maps excited to ground.
* Joint amplitudes are a flat C-ordered array whose reshaped view is
  ``(n_max + 1, 2, ..., 2)``: the field index varies slowest and atom slots
  follow in entry order, the most recently attached atom varying fastest.
* Quadratures are ``X1 = (a + a*)/2`` and ``X2 = (a - a*)/2i``; the vacuum
  variance of each is 1/4.
* ``hbar`` is absorbed into rates: Hamiltonians are in rad/s and
  ``evolve_nonhermitian`` computes ``exp(-i H dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from math import ceil, pi, sqrt

import numpy as np
from scipy.special import gammaln

from .errors import MemoryBudgetError, NumericsError

GROUND, EXCITED = 0, 1

#: Hard default for the joint-amplitude budget (complex128 entries).
DEFAULT_MAX_AMPLITUDES = 1 << 24

_HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class FockCutoff:
    """Fock-space truncation at ``n_max`` inclusive."""

    n_max: int

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def _nmax(cutoff: FockCutoff | int) -> int:
    return cutoff.n_max if isinstance(cutoff, FockCutoff) else int(cutoff)


@dataclass(frozen=True)
class LinearOperator:
    """Dense operator with a declared hermiticity flag.

    Operators flagged hermitian are verified against their adjoint at
    construction time so that downstream propagators can rely on the flag.
    """

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        if self.hermitian:
            defect = np.abs(m - m.conj().T).max()
            if defect >= _HERMITIAN_TOL:
                raise ValueError(
                    f"operator flagged hermitian has |A - A^dag| = {defect:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def annihilation(cutoff: FockCutoff | int) -> LinearOperator:
    """Photon annihilation operator ``a`` at the given cutoff."""
    n = _nmax(cutoff)
    m = np.zeros((n + 1, n + 1), dtype=complex)
    idx = np.arange(1, n + 1)
    m[idx - 1, idx] = np.sqrt(idx)
    return LinearOperator(m)


def creation(cutoff: FockCutoff | int) -> LinearOperator:
    n = _nmax(cutoff)
    return LinearOperator(annihilation(n).matrix.conj().T)


def number_operator(cutoff: FockCutoff | int) -> LinearOperator:
    n = _nmax(cutoff)
    return LinearOperator(np.diag(np.arange(n + 1, dtype=complex)), hermitian=True)


def atom_lowering(slot: int, register_size: int) -> LinearOperator:
    """Lowering operator on one atom slot of a ``2**register_size`` register.

    Identity on every other slot. Slot 0 is the earliest-entered atom
    (slowest atom axis).
    """
    if not 0 <= slot < register_size:
        raise ValueError(f"slot {slot} outside register of size {register_size}")
    sigma = np.zeros((2, 2), dtype=complex)
    sigma[GROUND, EXCITED] = 1.0
    op = np.eye(1, dtype=complex)
    for k in range(register_size):
        op = np.kron(op, sigma if k == slot else np.eye(2, dtype=complex))
    return LinearOperator(op)


def collective_lowering(register_size: int) -> LinearOperator:
    """``J_- = sum_k sigma_k`` over all slots of the register."""
    dim = 1 << register_size
    m = np.zeros((dim, dim), dtype=complex)
    for k in range(register_size):
        m += atom_lowering(k, register_size).matrix
    return LinearOperator(m)


def effective_hamiltonian(
    cutoff: FockCutoff | int,
    register_size: int,
    g: float,
    kappa: float = 0.0,
) -> LinearOperator:
    """Dense ``H_eff = g (a J_+ + a* J_-) - i (kappa/2) a* a`` on the joint space.

    With ``kappa = 0`` this is the resonant Tavis-Cummings generator and is
    flagged hermitian.
    """
    n = _nmax(cutoff)
    a = annihilation(n).matrix
    jm = collective_lowering(register_size).matrix
    jp = jm.conj().T
    h = g * (np.kron(a, jp) + np.kron(a.conj().T, jm))
    if kappa != 0.0:
        nf = number_operator(n).matrix
        h = h - 0.5j * kappa * np.kron(nf, np.eye(1 << register_size))
        return LinearOperator(h)
    return LinearOperator(h, hermitian=True)


# ---------------------------------------------------------------------------
# joint states


@dataclass
class JointState:
    """Pure state of the cavity mode plus ``n_atoms`` two-level atoms."""

    amps: np.ndarray
    n_max: int
    n_atoms: int

    def __post_init__(self) -> None:
        expected = (self.n_max + 1) << self.n_atoms
        if self.amps.shape != (expected,):
            raise ValueError(
                f"amplitude vector has shape {self.amps.shape}, "
                f"expected ({expected},) for n_max={self.n_max}, "
                f"n_atoms={self.n_atoms}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @property
    def dim(self) -> int:
        return self.amps.size

    def reshaped(self) -> np.ndarray:
        """View with the field index first and the atom register flattened."""
        return self.amps.reshape(self.n_max + 1, -1)

    def normalized(self) -> "JointState":
        n = self.norm
        if n <= 0.0:
            raise NumericsError("cannot normalize a zero state")
        return replace(self, amps=self.amps / n)


def field_state(vec: np.ndarray) -> JointState:
    """Wrap a bare field vector as a joint state with an empty register."""
    v = np.asarray(vec, dtype=complex)
    return JointState(amps=v.copy(), n_max=v.size - 1, n_atoms=0)


def attach_atom(
    state: JointState,
    phase: float,
    beta_sq: float,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> JointState:
    """Tensor a fresh dipole atom ``sqrt(1-beta_sq)|g> +/- sqrt(beta_sq)|e>``
    onto the register.

    ``phase`` selects the sign of the excited amplitude: 0 gives ``+``,
    pi gives ``-``. The new atom occupies the fastest-varying slot, keeping
    slots in entry order. Norm is preserved exactly.
    """
    if phase == 0.0:
        sign = 1.0
    elif phase == pi:
        sign = -1.0
    else:
        raise ValueError(f"phase must be 0 or pi, got {phase!r}")
    if not 0.0 <= beta_sq < 0.5:
        raise ValueError(f"beta_sq must lie in [0, 0.5), got {beta_sq}")
    if 2 * state.amps.size > max_amplitudes:
        raise MemoryBudgetError(
            f"attaching an atom needs {2 * state.amps.size} amplitudes, "
            f"budget is {max_amplitudes}"
        )
    atom = np.array([sqrt(1.0 - beta_sq), sign * sqrt(beta_sq)], dtype=complex)
    return JointState(
        amps=np.kron(state.amps, atom),
        n_max=state.n_max,
        n_atoms=state.n_atoms + 1,
    )


def measure_and_remove_atom(
    state: JointState, slot: int, draw: float
) -> tuple[JointState, str]:
    """Projective energy-basis measurement of one atom, then drop its slot.

    ``draw`` in [0, 1) fixes the Born outcome: below the excited-state
    probability yields "up", otherwise "down". The returned state is
    renormalized; remaining slots keep their entry order.
    """
    if not 0 <= slot < state.n_atoms:
        raise ValueError(f"slot {slot} outside register of size {state.n_atoms}")
    nf = state.n_max + 1
    lead = 1 << slot
    trail = 1 << (state.n_atoms - 1 - slot)
    view = state.amps.reshape(nf, lead, 2, trail)
    w_down = float(np.vdot(view[:, :, GROUND, :], view[:, :, GROUND, :]).real)
    w_up = float(np.vdot(view[:, :, EXCITED, :], view[:, :, EXCITED, :]).real)
    total = w_down + w_up
    if total <= 0.0:
        raise NumericsError("measurement on a zero-norm state")
    p_up = w_up / total
    if draw < p_up:
        branch, weight, outcome = EXCITED, w_up, "up"
    else:
        branch, weight, outcome = GROUND, w_down, "down"
    new = view[:, :, branch, :].reshape(-1) / sqrt(weight)
    return (
        JointState(amps=new.copy(), n_max=state.n_max, n_atoms=state.n_atoms - 1),
        outcome,
    )


def partial_trace_field(state: JointState) -> np.ndarray:
    """Reduced field density matrix; its trace equals the squared norm."""
    x = state.reshaped()
    return x @ x.conj().T


def field_populations(state: JointState) -> np.ndarray:
    x = state.reshaped()
    return (np.abs(x) ** 2).sum(axis=1)


def tail_mass(field: np.ndarray | JointState) -> float:
    """Total population of the top two Fock levels at the cutoff."""
    if isinstance(field, JointState):
        pops = field_populations(field)
    else:
        arr = np.asarray(field)
        pops = np.abs(arr) ** 2 if arr.ndim == 1 else np.diag(arr).real
    return float(pops[-1] + pops[-2])


# ---------------------------------------------------------------------------
# propagation


@lru_cache(maxsize=64)
def _sqrt_n(nf: int) -> np.ndarray:
    return np.sqrt(np.arange(nf, dtype=float))


def apply_effective_hamiltonian(
    amps: np.ndarray, n_max: int, n_atoms: int, g: float, kappa: float
) -> np.ndarray:
    """Matrix-free ``H_eff @ amps`` on the joint layout.

    Used where the joint dimension makes dense matrices wasteful; agrees
    with ``effective_hamiltonian`` elementwise.
    """
    nf = n_max + 1
    x = amps.reshape(nf, -1)
    rest = x.shape[1]
    sq = _sqrt_n(nf)

    jp = np.zeros_like(x)
    jm = np.zeros_like(x)
    for k in range(n_atoms):
        lead = 1 << k
        trail = rest >> (k + 1)
        v = x.reshape(nf, lead, 2, trail)
        jp.reshape(nf, lead, 2, trail)[:, :, EXCITED, :] += v[:, :, GROUND, :]
        jm.reshape(nf, lead, 2, trail)[:, :, GROUND, :] += v[:, :, EXCITED, :]

    out = np.zeros_like(x)
    out[:-1] = sq[1:, None] * jp[1:]          # a J_+
    out[1:] += sq[1:, None] * jm[:-1]         # a* J_-
    out *= g
    if kappa != 0.0:
        out += (-0.5j * kappa) * (np.arange(nf)[:, None] * x)
    return out.reshape(-1)


def effective_norm_bound(n_max: int, n_atoms: int, g: float, kappa: float) -> float:
    """Cheap upper bound on ||H_eff|| for step-size control."""
    return 2.0 * abs(g) * n_atoms * sqrt(n_max + 1.0) + 0.5 * abs(kappa) * n_max


def taylor_propagate(
    matvec,
    vec: np.ndarray,
    dt: float,
    norm_bound: float,
    tol: float = 1e-15,
    max_terms: int = 90,
) -> np.ndarray:
    """Apply ``exp(-i H dt)`` to ``vec`` by truncated Taylor series.

    The interval is split so each substep has ``||H|| dt <= 2``; the series
    is summed until the last term falls below ``tol`` relative to the
    running result, leaving a local error far below the 1e-10 per-step
    contract. Raises ``NumericsError`` if the series fails to converge.
    """
    theta = abs(dt) * norm_bound
    nsub = max(1, ceil(theta / 2.0))
    scale = -1j * dt / nsub
    v = vec
    for _ in range(nsub):
        acc = v.copy()
        term = v
        for k in range(1, max_terms + 1):
            term = matvec(term) * (scale / k)
            acc += term
            if np.linalg.norm(term) <= tol * np.linalg.norm(acc):
                break
        else:
            raise NumericsError(
                f"Taylor propagator did not converge in {max_terms} terms "
                f"(||H||dt ~ {theta:.3g})"
            )
        v = acc
    return v


def evolve_nonhermitian(
    state: JointState, h_eff: LinearOperator | np.ndarray, dt: float
) -> JointState:
    """Propagate a joint state under a (generally non-hermitian) generator.

    Returns ``exp(-i H_eff dt) |psi>`` without renormalizing, so the norm
    decay carries the no-jump probability.
    """
    mat = h_eff.matrix if isinstance(h_eff, LinearOperator) else np.asarray(h_eff)
    if mat.shape[0] != state.dim:
        raise ValueError(
            f"generator dimension {mat.shape[0]} does not match state {state.dim}"
        )
    bound = float(np.abs(mat).sum(axis=0).max())
    amps = taylor_propagate(lambda w: mat @ w, state.amps, dt, bound)
    return replace(state, amps=amps)


def damp_field(rho: np.ndarray, survival: float) -> np.ndarray:
    """Exact zero-temperature damping of a field density matrix.

    ``survival`` is the per-photon survival probability ``exp(-kappa t)``.
    Implemented as the closed-form Kraus sum of the attenuation channel,
    so there is no integration error.
    """
    if not 0.0 < survival <= 1.0:
        raise ValueError(f"survival must lie in (0, 1], got {survival}")
    dim = rho.shape[0]
    n = np.arange(dim)
    out = np.zeros_like(rho, dtype=complex)
    loss = 1.0 - survival
    for j in range(dim):
        if j > 0 and loss == 0.0:
            break
        # b_m = sqrt(C(m+j, j)) * loss^{j/2} * survival^{m/2}, m = 0..dim-1-j
        m = n[: dim - j]
        log_b = 0.5 * (gammaln(m + j + 1) - gammaln(m + 1) - gammaln(j + 1))
        if j:
            log_b = log_b + 0.5 * j * np.log(loss)
        b = np.exp(log_b) * survival ** (0.5 * m)
        out[: dim - j, : dim - j] += np.outer(b, b) * rho[j:, j:]
    return out
