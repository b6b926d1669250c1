"""Analytic reference states of the cavity field and phase-space tools.

State conventions:

* ``squeezed_vacuum(r)`` is the state annihilated by
  ``alpha^2 a - beta^2 a*`` with ``tanh r = beta^2/alpha^2``; its squeezing
  lies along X2 (``Var X2 = e^{-2r}/4``) and only even Fock levels are
  populated. The matching unitary is ``squeeze_operator(r) =
  exp(r(a*a* - aa)/2)``.
* Photon subtraction maps that state onto the squeezed one-photon state
  with mean photon number ``1 + 3 sinh^2 r``.
* Cat states are ``S(squeeze_r) (|alpha> +/- |-alpha>)``, normalized.

The Wigner function is evaluated from the displaced-parity form
``W(b) = (2/pi) Tr[rho D(2b) Pi]``; the Fock matrix elements of the
displacement operator are generated by a stable folded recurrence, so the
only truncation sensitivity is the state's own cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import atanh, cosh, pi, sinh, sqrt, tanh

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import NumericsError, TailMassError
from .hilbert import FockCutoff, LinearOperator, annihilation, tail_mass, _nmax

TAIL_LIMIT = 1e-6

# e^{-y/4} below this point underflows anyway; zeroing early keeps every
# intermediate of the Wigner recurrence finite for oversized grids.
_WIGNER_Y_CLAMP = 1400.0


def r_for_beta_sq(beta_sq: float) -> float:
    """Squeezing parameter of the pumped steady state, ``atanh(b/(1-b))``."""
    if not 0.0 <= beta_sq < 0.5:
        raise ValueError(f"beta_sq must lie in [0, 0.5), got {beta_sq}")
    return atanh(beta_sq / (1.0 - beta_sq))


def beta_sq_for_r(r: float) -> float:
    t = tanh(r)
    return t / (1.0 + t)


def default_cutoff(r: float) -> int:
    """Default Fock cutoff heuristic, ``ceil(8 (1 + sinh^2 r))``."""
    return int(np.ceil(8.0 * (1.0 + sinh(r) ** 2)))


def cutoff_for_tail(r: float, tol: float = 1e-8, extra_photons: int = 0) -> int:
    """Smallest even cutoff keeping the squeezed-vacuum tail below ``tol``.

    Uses the geometric bound tail(n) <= C_{n+2}^2 / (1 - tanh^2 r), which is
    free of the cancellation that plagues accumulating 1 - sum C_n^2.
    ``extra_photons`` inflates the budget for states derived by photon
    subtraction or mild mixing.
    """
    lam2 = tanh(r) ** 2
    amp2 = 1.0 / cosh(r)  # C_0^2
    n = 0
    while n < 20000:
        amp2_next = amp2 * lam2 * (n + 1) / (n + 2)
        if amp2_next / (1.0 - lam2) <= 0.1 * tol:
            return n + 2 + 2 * extra_photons
        n += 2
        amp2 = amp2_next
    raise NumericsError(f"no cutoff below 20000 reaches tail {tol:g} at r={r:g}")


@dataclass(frozen=True)
class SqueezeSpec:
    """Squeezing strength; the phase is fixed so squeezing lies along X2."""

    r: float

    def __post_init__(self) -> None:
        if self.r < 0.0:
            raise ValueError(f"squeeze parameter must be >= 0, got {self.r}")

    @property
    def mean_n(self) -> float:
        return sinh(self.r) ** 2


@dataclass(frozen=True)
class CatSpec:
    """Superposition of opposite coherent states, optionally squeezed."""

    alpha: complex
    parity: str = "odd"
    squeeze_r: float = 0.0

    def __post_init__(self) -> None:
        if self.parity not in ("odd", "even"):
            raise ValueError(f"parity must be 'odd' or 'even', got {self.parity!r}")
        if self.squeeze_r < 0.0:
            raise ValueError("squeeze_r must be >= 0")


def _as_r(spec: SqueezeSpec | float) -> float:
    return spec.r if isinstance(spec, SqueezeSpec) else float(spec)


def squeezed_vacuum(spec: SqueezeSpec | float, cutoff: FockCutoff | int) -> np.ndarray:
    """Squeezed-vacuum amplitudes by the stable two-step recurrence.

    Raises ``TailMassError`` when the cutoff is too small for the requested
    squeezing (top two levels above 1e-6).
    """
    r = _as_r(spec)
    n_max = _nmax(cutoff)
    lam = tanh(r)
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[0] = 1.0 / sqrt(cosh(r))
    for n in range(2, n_max + 1, 2):
        amps[n] = amps[n - 2] * lam * sqrt((n - 1) / n)
    _check_tail(amps, f"squeezed vacuum r={r:.4g}")
    return amps


def squeeze_operator(spec: SqueezeSpec | float, cutoff: FockCutoff | int) -> LinearOperator:
    """Unitary ``exp(r (a*a* - aa)/2)`` at the cutoff (numeric route).

    Truncation slightly distorts the action near the top levels, so callers
    should leave headroom above the support of the states they transform.
    """
    r = _as_r(spec)
    a = annihilation(cutoff).matrix
    gen = 0.5 * r * (a.conj().T @ a.conj().T - a @ a)
    return LinearOperator(expm(gen))


def subtract_photon(vec: np.ndarray) -> np.ndarray:
    """Normalized ``a |psi>``; fails on states with no photons."""
    v = np.asarray(vec, dtype=complex)
    out = np.zeros_like(v)
    n = np.arange(1, v.size)
    out[:-1] = np.sqrt(n) * v[1:]
    norm = np.linalg.norm(out)
    if norm < 1e-12:
        raise NumericsError("cannot subtract a photon from a photonless state")
    return out / norm


def coherent(alpha: complex, cutoff: FockCutoff | int) -> np.ndarray:
    n_max = _nmax(cutoff)
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, n_max + 1):
        amps[n] = amps[n - 1] * alpha / sqrt(n)
    return amps


def cat_state(spec: CatSpec, cutoff: FockCutoff | int) -> np.ndarray:
    """Normalized ``S(squeeze_r) (|alpha> - |-alpha>)`` (or ``+`` for even).

    The ``alpha -> 0`` limit of the odd cat is the single-photon state; it
    is handled explicitly so optimizers can probe the boundary.
    """
    n_max = _nmax(cutoff)
    sign = -1.0 if spec.parity == "odd" else 1.0
    if abs(spec.alpha) < 1e-8 and spec.parity == "odd":
        bare = np.zeros(n_max + 1, dtype=complex)
        bare[1] = 1.0
    else:
        bare = coherent(spec.alpha, n_max) + sign * coherent(-spec.alpha, n_max)
        norm = np.linalg.norm(bare)
        if norm < 1e-12:
            raise NumericsError(
                f"cat amplitude {spec.alpha} too small for parity {spec.parity}"
            )
        bare = bare / norm
    if spec.squeeze_r:
        bare = squeeze_operator(spec.squeeze_r, n_max).matrix @ bare
        bare = bare / np.linalg.norm(bare)
    _check_tail(bare, f"cat alpha={spec.alpha:.4g}, r={spec.squeeze_r:.4g}")
    return bare


def squeezed_one_photon(spec: SqueezeSpec | float, cutoff: FockCutoff | int) -> np.ndarray:
    """Photon-subtracted squeezed vacuum via the closed-form identity
    ``a S(r)|0> = sinh(r) S(r)|1>``."""
    return subtract_photon(squeezed_vacuum(spec, cutoff))


def odd_cat_mean_n(alpha_abs_sq: float) -> float:
    """Mean photon number of the bare odd cat, ``|a|^2 coth(|a|^2)``."""
    if alpha_abs_sq <= 0.0:
        return 1.0
    return alpha_abs_sq / tanh(alpha_abs_sq)


def _check_tail(vec: np.ndarray, what: str) -> None:
    t = tail_mass(vec)
    if t >= TAIL_LIMIT:
        raise TailMassError(
            f"cutoff too small for {what}: tail mass {t:.3e} >= {TAIL_LIMIT}"
        )


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class StateObservables:
    mean_n: float
    var_x1: float
    var_x2: float
    squeezing_db: float
    parity: float


def _as_rho(state: np.ndarray) -> np.ndarray:
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return arr
    raise ValueError(f"expected a state vector or density matrix, got {arr.shape}")


def observables(state: np.ndarray) -> StateObservables:
    """Photon number, quadrature variances, squeezing in dB, and parity."""
    rho = _as_rho(state)
    dim = rho.shape[0]
    n = np.arange(dim)
    pops = np.diag(rho).real
    mean_n = float(n @ pops)
    a = annihilation(dim - 1).matrix
    exp_a = np.trace(a @ rho)
    exp_aa = np.trace(a @ a @ rho)
    x2sum = 1.0 + 2.0 * mean_n  # <a a* + a* a>
    var_x1 = 0.25 * (x2sum + 2.0 * exp_aa.real) - exp_a.real**2
    var_x2 = 0.25 * (x2sum - 2.0 * exp_aa.real) - exp_a.imag**2
    squeezing_db = -10.0 * np.log10(4.0 * min(var_x1, var_x2))
    parity = float(((-1.0) ** n) @ pops)
    return StateObservables(mean_n, float(var_x1), float(var_x2), float(squeezing_db), parity)


def fock_populations(state: np.ndarray) -> np.ndarray:
    rho = _as_rho(state)
    return np.diag(rho).real.copy()


@dataclass(frozen=True)
class FieldMoments:
    mean_n: float
    exp_a: complex
    exp_a2: complex


def field_moments(state: np.ndarray) -> FieldMoments:
    """First and second moments of ``a`` plus the photon number."""
    rho = _as_rho(state)
    dim = rho.shape[0]
    mean_n = float(np.arange(dim) @ np.diag(rho).real)
    a = annihilation(dim - 1).matrix
    return FieldMoments(mean_n, complex(np.trace(a @ rho)),
                        complex(np.trace(a @ a @ rho)))


def squeezed_frame_quanta(state: np.ndarray, r: float) -> float:
    """Mean quanta of ``b = S(r) a S+(r)``, zero exactly on SqVS(r)."""
    m = field_moments(state)
    ch, sh = np.cosh(r), np.sinh(r)
    return float(
        ch * ch * m.mean_n + sh * sh * (m.mean_n + 1.0)
        - 2.0 * ch * sh * m.exp_a2.real
    )


# ---------------------------------------------------------------------------
# Wigner transform


@dataclass
class WignerGrid:
    """Wigner function samples on a rectangular (x1, x2) grid.

    ``values[i, j]`` is ``W(x1[i], x2[j])``. The CSV layout is row-major
    with columns ``x1,x2,w`` at 9 significant digits.
    """

    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray

    @property
    def integral(self) -> float:
        dx1 = self.x1[1] - self.x1[0] if self.x1.size > 1 else 1.0
        dx2 = self.x2[1] - self.x2[0] if self.x2.size > 1 else 1.0
        return float(self.values.sum() * dx1 * dx2)

    def value_at(self, x1: float, x2: float) -> float:
        i = int(np.argmin(np.abs(self.x1 - x1)))
        j = int(np.argmin(np.abs(self.x2 - x2)))
        return float(self.values[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x1,x2,w\n")
            for i, u in enumerate(self.x1):
                for j, v in enumerate(self.x2):
                    fh.write(f"{u:.9g},{v:.9g},{self.values[i, j]:.9g}\n")


def auto_half_width(state: np.ndarray) -> float:
    """Grid half-width covering the state support, ``max(4, 3 sqrt(<n>+1))``."""
    mean_n = observables(state).mean_n
    return max(4.0, 3.0 * sqrt(mean_n + 1.0))


def wigner(
    state: np.ndarray,
    half_width: float | None = None,
    resolution: int = 201,
    x1: np.ndarray | None = None,
    x2: np.ndarray | None = None,
) -> WignerGrid:
    """Displaced-parity Wigner function ``W(b) = (2/pi) Tr[rho D(2b) Pi]``.

    The displacement matrix elements are produced by the folded ladder
    recurrence (exact for any state supported below the cutoff), vectorized
    over the grid. Entries of ``rho`` below 1e-17 of the peak are skipped.
    """
    rho = _as_rho(state)
    if x1 is None or x2 is None:
        hw = auto_half_width(rho) if half_width is None else float(half_width)
        x1 = np.linspace(-hw, hw, resolution)
        x2 = np.linspace(-hw, hw, resolution)
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    two_beta = 2.0 * (g1 + 1j * g2)
    y = (two_beta.real**2 + two_beta.imag**2)  # |2 beta|^2 = 4 |beta|^2
    e_quarter = np.exp(-0.25 * y)
    e_quarter[y > _WIGNER_Y_CLAMP] = 0.0

    n_max = rho.shape[0] - 1
    skip = 1e-17 * max(np.abs(rho).max(), 1e-300)
    w = np.zeros_like(y)
    tb_pow = np.ones_like(two_beta)  # (2 beta)^k
    for k in range(n_max + 1):
        col = np.diagonal(rho, offset=k)
        if np.abs(col).max() > skip:
            # folded ladder over m at fixed superdiagonal k
            lm_prev = np.zeros_like(y)
            lm = e_quarter.copy()
            c_mk = float(np.exp(-0.5 * gammaln(k + 1)))  # sqrt(m!/(m+k)!) at m=0
            sign = 1.0
            for m in range(n_max + 1 - k):
                rho_el = col[m]
                if abs(rho_el) > skip:
                    weight = e_quarter * lm
                    if k == 0:
                        w += (sign * c_mk * rho_el.real) * weight
                    else:
                        w += (2.0 * sign * c_mk) * (rho_el * tb_pow).real * weight
                lm, lm_prev = (
                    ((2 * m + k + 1 - y) * lm - (m + k) * lm_prev) / (m + 1),
                    lm,
                )
                c_mk *= sqrt((m + 1) / (m + 1 + k))
                sign = -sign
        tb_pow = tb_pow * two_beta
    w *= 2.0 / pi
    return WignerGrid(x1=np.asarray(x1, dtype=float), x2=np.asarray(x2, dtype=float), values=w)
