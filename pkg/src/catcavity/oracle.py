"""Independent brute-force verifiers for the trajectory engine.

Three reference computations, all dense and deliberately simple:

* ``integrate_lindblad``: a zero-temperature Lindblad master equation
  integrated with an adaptive high-order Runge-Kutta method, a different
  algorithm family from the engine's fixed-step Taylor exponential so the
  two cannot share a bug class.
* ``effective_squeezed_frame_decay``: the coarse-grained relaxation model
  ``drho/dt = (1/2 tau_c)(2 b rho b+ - b+b rho - rho b+b)`` with
  ``b = S(r) a S+(r)``; the frame transform is applied to the operators
  once at setup, so integration stays in the lab frame.
* ``pairwise_kick_map``: the exact field map of one opposite-phase atom
  pair crossing the cavity, either simultaneously or staggered, used to
  bound the error of treating staggered passage as simultaneous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import hilbert
from .errors import ConfigError, NumericsError

ORACLE_DIM_CAP = 4096

_TRACE_TOL = 1e-8
# positivity is only audited below this dimension (eigendecomposition cost)
_POSITIVITY_DIM = 512


@dataclass(frozen=True)
class LindbladSpec:
    """One master-equation integration problem.

    ``t_grid`` holds absolute times (s), nondecreasing, starting at or
    after 0; the initial state applies at t=0.
    """

    hamiltonian: hilbert.LinearOperator
    collapse_ops: tuple[hilbert.LinearOperator, ...]
    initial: np.ndarray
    t_grid: tuple[float, ...]

    def validate(self) -> None:
        h = self.hamiltonian.matrix
        scale = max(1.0, float(np.abs(h).max()))
        if float(np.abs(h - h.conj().T).max()) > 1e-12 * scale:
            raise ConfigError("Lindblad hamiltonian must be hermitian")
        rho = np.asarray(self.initial)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ConfigError("initial state must be a square density matrix")
        if rho.shape[0] != h.shape[0]:
            raise ConfigError(
                f"initial dimension {rho.shape[0]} != hamiltonian {h.shape[0]}"
            )
        for op in self.collapse_ops:
            if op.matrix.shape[0] != h.shape[0]:
                raise ConfigError("collapse operator dimension mismatch")
        if abs(complex(np.trace(rho)) - 1.0) > 1e-6:
            raise ConfigError("initial state must have unit trace")
        if float(np.abs(rho - rho.conj().T).max()) > 1e-10:
            raise ConfigError("initial state must be hermitian")
        ts = self.t_grid
        if len(ts) == 0 or any(t < 0 for t in ts) or any(
            b < a for a, b in zip(ts, ts[1:])
        ):
            raise ConfigError("t_grid must be nondecreasing and non-negative")


def integrate_lindblad(
    spec: LindbladSpec,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    dim_cap: int = ORACLE_DIM_CAP,
) -> list[np.ndarray]:
    """Density matrices at ``spec.t_grid`` under the Lindblad generator."""
    spec.validate()
    dim = spec.initial.shape[0]
    if dim > dim_cap:
        raise ConfigError(f"oracle dimension {dim} exceeds cap {dim_cap}")
    h = spec.hamiltonian.matrix.astype(complex)
    ls = [op.matrix.astype(complex) for op in spec.collapse_ops]
    ldl = [l.conj().T @ l for l in ls]

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h)
        for l, dd in zip(ls, ldl):
            out += l @ rho @ l.conj().T - 0.5 * (dd @ rho + rho @ dd)
        return out.ravel()

    # integrate segment by segment so every reported state is a true
    # endpoint of the error-controlled integration, never a dense-output
    # interpolant (whose extra error can break positivity at 1e-8)
    y = spec.initial.astype(complex).ravel()
    t_prev = 0.0
    rhos: list[np.ndarray] = []
    for t in spec.t_grid:
        if t > t_prev:
            sol = solve_ivp(
                rhs, (t_prev, t), y, method="DOP853", rtol=rtol, atol=atol
            )
            if not sol.success:
                raise NumericsError(
                    f"master-equation integration failed: {sol.message}"
                )
            y = sol.y[:, -1]
            t_prev = t
        m = y.reshape(dim, dim)
        # evolution preserves hermiticity; fold back integrator asymmetry
        rhos.append(0.5 * (m + m.conj().T))
    # preservation is the invariant, not unit normalization: a slightly
    # truncated initial state (trace 1 - tail) must pass unchanged
    trace_in = float(np.trace(spec.initial).real)
    for t, rho in zip(spec.t_grid, rhos):
        err = abs(complex(np.trace(rho)) - trace_in)
        if err > _TRACE_TOL:
            raise NumericsError(f"trace drifted by {err:.2e} at t={t:.3e}s")
        if dim <= _POSITIVITY_DIM:
            lo = float(np.linalg.eigvalsh(rho).min())
            if lo < -_TRACE_TOL:
                raise NumericsError(
                    f"negativity {lo:.2e} in integrated state at t={t:.3e}s"
                )
    return rhos


def squeezed_frame_collapse(r: float, n_max: int) -> np.ndarray:
    """The operator ``b = S(r) a S+(r) = a cosh r - a+ sinh r``."""
    a = hilbert.annihilation(n_max).matrix
    return math.cosh(r) * a - math.sinh(r) * a.conj().T


def effective_squeezed_frame_decay(
    r: float,
    tau_c: float,
    initial: np.ndarray,
    t_grid: tuple[float, ...],
    **kwargs,
) -> list[np.ndarray]:
    """Coarse-grained cavity relaxation toward the squeezed vacuum.

    Integrates zero-temperature decay of the frame quanta at rate
    ``1/tau_c``; the fixed point is ``S(r)|0><0|S+(r)``.
    """
    if tau_c <= 0.0:
        raise ConfigError(f"tau_c must be > 0, got {tau_c}")
    n_max = initial.shape[0] - 1
    b = squeezed_frame_collapse(r, n_max)
    spec = LindbladSpec(
        hamiltonian=hilbert.LinearOperator(
            np.zeros_like(initial, dtype=complex), hermitian=True
        ),
        collapse_ops=(hilbert.LinearOperator(b / math.sqrt(tau_c)),),
        initial=initial,
        t_grid=tuple(t_grid),
    )
    return integrate_lindblad(spec, **kwargs)


# ---------------------------------------------------------------------------
# exact pair-transit maps


def _pair_vector(beta_sq: float) -> np.ndarray:
    alpha = math.sqrt(1.0 - beta_sq)
    beta = math.sqrt(beta_sq)
    first = np.array([alpha, beta])  # dipole phase 0
    second = np.array([alpha, -beta])  # dipole phase pi
    return np.kron(first, second)


def _trace_register(rho_joint: np.ndarray, nf: int) -> np.ndarray:
    reg = rho_joint.shape[0] // nf
    return np.einsum(
        "iaja->ij", rho_joint.reshape(nf, reg, nf, reg)
    )


def pairwise_kick_map(
    beta_sq: float,
    g: float,
    t_int: float,
    mode: str = "simultaneous",
    field: np.ndarray | None = None,
    stagger_dt: float | None = None,
    dim_cap: int = ORACLE_DIM_CAP,
) -> np.ndarray:
    """Exact field density-matrix map of one opposite-phase pair transit.

    ``simultaneous``: both atoms couple for the full ``t_int``.
    ``staggered``: the second atom enters ``stagger_dt`` after the first,
    each atom still couples for ``t_int``; the propagator factorizes into
    single-atom, two-atom, single-atom segments. Both atoms are measured
    out (full trace) after the pass.
    """
    field = np.asarray(field, dtype=complex)
    if field.ndim == 1:
        field = np.outer(field, field.conj())
    nf = field.shape[0]
    if 4 * nf > dim_cap:
        raise ConfigError(f"joint dimension {4 * nf} exceeds cap {dim_cap}")
    n_max = nf - 1
    h_both = hilbert.effective_hamiltonian(n_max, 2, g, 0.0).matrix
    pair = _pair_vector(beta_sq)
    joint = np.kron(field, np.outer(pair, pair.conj()))
    if mode == "simultaneous":
        u = expm(-1j * t_int * h_both)
    elif mode == "staggered":
        if stagger_dt is None or not 0.0 < stagger_dt <= t_int:
            raise ConfigError("staggered mode needs 0 < stagger_dt <= t_int")
        a = hilbert.annihilation(n_max).matrix
        s0 = hilbert.atom_lowering(0, 2).matrix
        s1 = hilbert.atom_lowering(1, 2).matrix
        h_first = g * (np.kron(a, s0.conj().T) + np.kron(a.conj().T, s0))
        h_second = g * (np.kron(a, s1.conj().T) + np.kron(a.conj().T, s1))
        u = (
            expm(-1j * stagger_dt * h_second)
            @ expm(-1j * (t_int - stagger_dt) * h_both)
            @ expm(-1j * stagger_dt * h_first)
        )
    else:
        raise ConfigError(f"unknown kick-map mode {mode!r}")
    out = u @ joint @ u.conj().T
    return _trace_register(out, nf)


def paired_injection_series(
    n_max: int,
    g: float,
    kappa: float,
    t_int: float,
    beta_sq: float,
    n_passes: int,
    initial: np.ndarray | None = None,
    dim_cap: int = ORACLE_DIM_CAP,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> list[np.ndarray]:
    """Master-equation reference for simultaneous paired injection.

    At each pass boundary a fresh opposite-phase pair is attached, the
    joint field+pair Lindblad equation (coherent coupling plus cavity
    decay) is integrated across ``t_int``, and the atoms are traced out.
    Returns the field state after each of the ``n_passes`` boundaries;
    this is exactly the ensemble average of the paired-simultaneous
    trajectory unraveling.
    """
    nf = n_max + 1
    if 4 * nf > dim_cap:
        raise ConfigError(f"joint dimension {4 * nf} exceeds cap {dim_cap}")
    if initial is None:
        initial = np.zeros((nf, nf), dtype=complex)
        initial[0, 0] = 1.0
    rho = np.asarray(initial, dtype=complex)
    h_op = hilbert.effective_hamiltonian(n_max, 2, g, 0.0)
    a_joint = hilbert.LinearOperator(
        math.sqrt(kappa) * np.kron(hilbert.annihilation(n_max).matrix, np.eye(4))
    )
    pair = _pair_vector(beta_sq)
    pair_rho = np.outer(pair, pair.conj())
    out: list[np.ndarray] = []
    for _ in range(n_passes):
        joint0 = np.kron(rho, pair_rho)
        spec = LindbladSpec(h_op, (a_joint,), joint0, (t_int,))
        joint1 = integrate_lindblad(spec, rtol=rtol, atol=atol, dim_cap=dim_cap)[-1]
        rho = _trace_register(joint1, nf)
        out.append(rho)
    return out
