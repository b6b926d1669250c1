"""Stochastic quantum-trajectory engine for the pumped, decaying cavity.

Implements the norm-threshold Monte Carlo wave-function method: between
events the joint state evolves under the non-hermitian generator
``H_eff = g (a J_+ + a* J_-) - i (kappa/2) a* a``; a photon jump fires when
the squared norm crosses a uniform threshold, the jump time is bisected to
``dt/100``, the field is collapsed with ``a`` and the herald is flagged
detected with probability ``eta`` (undetected jumps still collapse the
state). Atoms enter in alternating-phase dipole states and are measured in
the energy basis on exit, which removes their register slot.

Event times are snapped to an integer grid of ``dt/64`` so that identical
configurations replay identical event sequences byte for byte and interval
propagators can be cached exactly; jump times remain continuous within an
interval.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import hilbert, refstates
from .errors import ConfigError, NumericsError, RegisterCapError, TailMassError

GRID_SUBDIV = 64

# Above this joint dimension the engine switches from cached dense
# generators to matrix-free application.
DENSE_DIM_LIMIT = 1024

_EXPM_CACHE_LIMIT = 512
_TAIL_ABORT = 1e-6

_PRIO_CLICK, _PRIO_EXIT, _PRIO_ENTER, _PRIO_SAMPLE, _PRIO_END = range(5)

_PHASES = ("0", "pi")
_PHASE_VALUE = {"0": 0.0, "pi": math.pi}


def characteristic_rate(r: float, mean_atoms: float, g: float, t_int: float) -> float:
    """Relaxation rate of the pumped cavity, ``exp(-2r) <N> g^2 t_int``."""
    return math.exp(-2.0 * r) * mean_atoms * g * g * t_int


@dataclass
class SimConfig:
    """Physical and numerical parameters of one trajectory run.

    All quantities are SI: ``g`` in rad/s, ``kappa`` in 1/s (photon energy
    decay rate), times in seconds. ``kappa * tau_c`` is derived, never set
    directly; use ``with_kappa_tau_c`` to target a dimensionless decay.
    """

    g: float
    kappa: float
    t_int: float
    beta_sq: float
    mean_atoms: float
    eta: float
    n_max: int
    dt: float
    seed: int
    duration: float | None = None
    injection_mode: str = "poisson"
    stagger_dt: float | None = None
    # numerical controls
    sample_interval: float | None = None
    sample_times: tuple[float, ...] | None = None
    burn_in: float | None = None
    initial_field: str = "vacuum"
    store_rho: bool = False
    record_events: bool = True
    register_cap: int | None = None
    max_amplitudes: int = hilbert.DEFAULT_MAX_AMPLITUDES

    # ---- derived quantities -------------------------------------------

    @property
    def r(self) -> float:
        return refstates.r_for_beta_sq(self.beta_sq)

    @property
    def tau_c(self) -> float:
        return 1.0 / characteristic_rate(self.r, self.mean_atoms, self.g, self.t_int)

    @property
    def kappa_tau_c(self) -> float:
        return self.kappa * self.tau_c

    @property
    def g_t_int(self) -> float:
        return self.g * self.t_int

    @property
    def resolved_burn_in(self) -> float:
        return 10.0 * self.tau_c if self.burn_in is None else self.burn_in

    @property
    def resolved_sample_interval(self) -> float:
        if self.sample_interval is not None:
            return self.sample_interval
        return self.tau_c / 20.0

    @property
    def resolved_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        return self.resolved_burn_in + 10.0 * self.tau_c

    @property
    def resolved_register_cap(self) -> int:
        if self.register_cap is not None:
            return self.register_cap
        cap = math.ceil(self.mean_atoms + 6.0 * math.sqrt(self.mean_atoms))
        # never admit a register the amplitude budget cannot hold
        budget_cap = int(
            math.floor(math.log2(max(2.0, self.max_amplitudes / (self.n_max + 1))))
        )
        return min(cap, budget_cap)

    @classmethod
    def with_kappa_tau_c(cls, kappa_tau_c: float, **kwargs) -> "SimConfig":
        """Build a config with ``kappa`` chosen as ``kappa_tau_c / tau_c``."""
        probe = cls(kappa=0.0, **kwargs)
        return replace(probe, kappa=kappa_tau_c / probe.tau_c)

    # ---- validation ----------------------------------------------------

    def validate(self) -> None:
        def _require(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        _require(self.g > 0.0, f"g must be > 0, got {self.g}")
        _require(self.kappa >= 0.0, f"kappa must be >= 0, got {self.kappa}")
        _require(self.t_int > 0.0, f"t_int must be > 0, got {self.t_int}")
        _require(
            0.0 <= self.beta_sq < 0.5,
            f"beta_sq must lie in [0, 0.5) (steady state exists only there), "
            f"got {self.beta_sq}",
        )
        _require(self.mean_atoms > 0.0, f"mean_atoms must be > 0, got {self.mean_atoms}")
        _require(0.0 <= self.eta <= 1.0, f"eta must lie in [0, 1], got {self.eta}")
        _require(self.n_max >= 2, f"n_max must be >= 2, got {self.n_max}")
        _require(self.dt > 0.0, f"dt must be > 0, got {self.dt}")
        _require(self.resolved_duration > 0.0, "duration must be > 0")
        _require(
            self.injection_mode in ("poisson", "paired_simultaneous", "paired_staggered"),
            f"unknown injection_mode {self.injection_mode!r}",
        )
        if self.injection_mode.startswith("paired"):
            _require(
                float(self.mean_atoms).is_integer() and int(self.mean_atoms) % 2 == 0,
                "paired injection needs an even integer mean_atoms",
            )
        if self.injection_mode == "paired_staggered":
            _require(
                self.stagger_dt is not None and 0.0 < self.stagger_dt < self.t_int,
                "paired_staggered needs 0 < stagger_dt < t_int",
            )
        _require(self.initial_field in ("vacuum", "sqvs"),
                 f"unknown initial_field {self.initial_field!r}")
        cap = self.resolved_register_cap
        _require(
            cap >= self.mean_atoms + 3.0 * math.sqrt(self.mean_atoms),
            f"register cap {cap} leaves no headroom over mean occupation "
            f"{self.mean_atoms}; raise max_amplitudes or lower n_max",
        )
        if self.sample_times is not None:
            _require(all(t >= 0.0 for t in self.sample_times),
                     "sample_times must be non-negative")


def derive_trajectory_seed(master_seed: int, index: int) -> int:
    """Per-trajectory seed, a stable hash of (master seed, trajectory index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class AtomRecord:
    """One atom of the injection schedule (times on the internal grid)."""

    atom_id: int
    phase: str  # "0" or "pi"
    entry_step: int
    exit_step: int


@dataclass(frozen=True)
class TrajectoryEvent:
    t: float
    kind: str  # AtomEnter | AtomExit | PhotonJump
    atom_id: int | None
    phase: str | None
    outcome: str | None
    detected: bool | None
    mean_n: float
    norm: float


@dataclass(frozen=True)
class SampleRecord:
    t: float
    mean_n: float
    var_x1: float
    var_x2: float
    f_sqvs: float
    tail_mass: float
    rho: np.ndarray | None = None


@dataclass(frozen=True)
class HeraldRecord:
    t: float
    detected: bool
    rho: np.ndarray
    pre_jump_rho: np.ndarray
    forced: bool = False


@dataclass
class TrajectoryOutput:
    config: SimConfig
    schedule: list[AtomRecord]
    events: list[TrajectoryEvent]
    samples: list[SampleRecord]
    heralds: list[HeraldRecord]

    @property
    def detected_heralds(self) -> list[HeraldRecord]:
        return [h for h in self.heralds if h.detected]


# ---------------------------------------------------------------------------
# schedule generation


def _build_schedule(config: SimConfig, rng: np.random.Generator,
                    h: float, dur_steps: int) -> list[AtomRecord]:
    t_steps = max(1, round(config.t_int / h))
    atoms: list[AtomRecord] = []
    if config.injection_mode == "poisson":
        rate = config.mean_atoms / config.t_int
        t = 0.0
        aid = 0
        while True:
            t += rng.exponential(1.0 / rate)
            step = round(t / h)
            if step >= dur_steps:
                break
            atoms.append(AtomRecord(aid, _PHASES[aid % 2], step, step + t_steps))
            aid += 1
    elif config.injection_mode == "paired_simultaneous":
        n_pairs = int(config.mean_atoms) // 2
        aid = 0
        k = 0
        while k * t_steps < dur_steps:
            for _ in range(n_pairs):
                base = k * t_steps
                atoms.append(AtomRecord(aid, _PHASES[aid % 2], base, base + t_steps))
                aid += 1
                atoms.append(AtomRecord(aid, _PHASES[aid % 2], base, base + t_steps))
                aid += 1
            k += 1
    else:  # paired_staggered
        n_pairs = int(config.mean_atoms) // 2
        stag_steps = max(1, round(config.stagger_dt / h))
        cycle = t_steps + stag_steps
        aid = 0
        k = 0
        while k * cycle < dur_steps:
            for _ in range(n_pairs):
                base = k * cycle
                atoms.append(AtomRecord(aid, _PHASES[aid % 2], base, base + t_steps))
                aid += 1
                atoms.append(
                    AtomRecord(aid, _PHASES[aid % 2], base + stag_steps,
                               base + stag_steps + t_steps)
                )
                aid += 1
            k += 1
    return atoms


def _sample_steps(config: SimConfig, h: float, dur_steps: int) -> list[int]:
    if config.sample_times is not None:
        steps = sorted({min(dur_steps, round(t / h)) for t in config.sample_times})
        return steps
    interval = max(1, round(config.resolved_sample_interval / h))
    first = math.ceil(round(config.resolved_burn_in / h) / interval) * interval
    return list(range(first, dur_steps + 1, interval))


# ---------------------------------------------------------------------------
# engine


class _Engine:
    def __init__(self, config: SimConfig, rng: np.random.Generator,
                 forced_click_steps: tuple[int, ...] = ()):
        self.config = config
        self.rng = rng
        self.h = config.dt / GRID_SUBDIV
        self.dur_steps = max(1, round(config.resolved_duration / self.h))
        self.schedule = _build_schedule(config, rng, self.h, self.dur_steps)
        self.nf = config.n_max + 1
        self.sqrt_n = np.sqrt(np.arange(self.nf))
        self.ref_sqvs = refstates.squeezed_vacuum(config.r, config.n_max) \
            if config.beta_sq > 0.0 else None
        self.use_expm_cache = config.injection_mode.startswith("paired")
        self._h_cache: dict[int, tuple[np.ndarray, float]] = {}
        self._u_cache: dict[tuple[int, int], np.ndarray] = {}

        self.events: list[TrajectoryEvent] = []
        self.samples: list[SampleRecord] = []
        self.heralds: list[HeraldRecord] = []
        self.slots: list[AtomRecord] = []

        if config.initial_field == "sqvs":
            vec = refstates.squeezed_vacuum(config.r, config.n_max)
        else:
            vec = np.zeros(self.nf, dtype=complex)
            vec[0] = 1.0
        self.state = hilbert.field_state(vec)
        self.forced_click_steps = forced_click_steps

    # -- propagation ------------------------------------------------------

    def _dense_h(self, n_atoms: int) -> tuple[np.ndarray, float]:
        hit = self._h_cache.get(n_atoms)
        if hit is None:
            op = hilbert.effective_hamiltonian(
                self.config.n_max, n_atoms, self.config.g, self.config.kappa
            )
            mat = op.matrix
            hit = (mat, float(np.abs(mat).sum(axis=0).max()))
            self._h_cache[n_atoms] = hit
        return hit

    def _propagate(self, amps: np.ndarray, span: float,
                   steps_key: int | None = None) -> np.ndarray:
        cfg = self.config
        m = self.state.n_atoms
        dim = amps.size
        if dim <= DENSE_DIM_LIMIT:
            mat, bound = self._dense_h(m)
            if (
                self.use_expm_cache
                and steps_key is not None
                and len(self._u_cache) < _EXPM_CACHE_LIMIT
            ):
                key = (m, steps_key)
                u = self._u_cache.get(key)
                if u is None:
                    u = expm(-1j * span * mat)
                    self._u_cache[key] = u
                return u @ amps
            return hilbert.taylor_propagate(lambda v: mat @ v, amps, span, bound)
        bound = hilbert.effective_norm_bound(cfg.n_max, m, cfg.g, cfg.kappa)
        return hilbert.taylor_propagate(
            lambda v: hilbert.apply_effective_hamiltonian(
                v, cfg.n_max, m, cfg.g, cfg.kappa
            ),
            amps,
            span,
            bound,
        )

    def _apply_photon_loss(self, amps: np.ndarray) -> np.ndarray:
        x = amps.reshape(self.nf, -1)
        out = np.zeros_like(x)
        out[:-1] = self.sqrt_n[1:, None] * x[1:]
        return out.reshape(-1)

    # -- bookkeeping ------------------------------------------------------

    def _normalized_reduced(self) -> np.ndarray:
        rho = hilbert.partial_trace_field(self.state)
        tr = np.trace(rho).real
        return rho / tr

    def _field_summary(self) -> tuple[float, float]:
        pops = hilbert.field_populations(self.state)
        total = pops.sum()
        mean_n = float(np.arange(self.nf) @ pops / total)
        return mean_n, float(math.sqrt(total))

    def _log(self, t: float, kind: str, atom_id=None, phase=None,
             outcome=None, detected=None) -> None:
        if not self.config.record_events:
            return
        mean_n, norm = self._field_summary()
        self.events.append(
            TrajectoryEvent(t, kind, atom_id, phase, outcome, detected, mean_n, norm)
        )

    def _jump(self, t: float, forced: bool = False) -> None:
        """Collapse the field with ``a`` at time ``t`` (state must be normalized)."""
        pre_rho = self._normalized_reduced()
        collapsed = self._apply_photon_loss(self.state.amps)
        norm = np.linalg.norm(collapsed)
        if norm <= 0.0:
            raise NumericsError("photon jump fired on a photonless state")
        self.state = replace(self.state, amps=collapsed / norm)
        detected = bool(self.rng.random() < self.config.eta) if not forced else True
        self.heralds.append(
            HeraldRecord(t, detected, self._normalized_reduced(), pre_rho, forced)
        )
        self.threshold = self.rng.random()
        self._log(t, "PhotonJump", detected=detected)

    def _advance(self, from_step: int, to_step: int) -> None:
        """Propagate between marks, firing photon jumps on threshold crossings."""
        if to_step == from_step:
            return
        span = (to_step - from_step) * self.h
        start_t = from_step * self.h
        elapsed = 0.0
        first = True
        while True:
            remaining = span - elapsed
            if remaining <= 0.0:
                return
            key = (to_step - from_step) if first else None
            cand = self._propagate(self.state.amps, remaining, steps_key=key)
            first = False
            n2 = float(np.vdot(cand, cand).real)
            if n2 > self.threshold:
                self.state = replace(self.state, amps=cand)
                return
            # bisect the crossing ||psi(tau)||^2 = threshold to dt/100
            tol = self.config.dt / 100.0
            lo, hi = 0.0, remaining
            lo_amps = self.state.amps
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                trial = self._propagate(lo_amps, mid - lo)
                if float(np.vdot(trial, trial).real) > self.threshold:
                    lo, lo_amps = mid, trial
                else:
                    hi = mid
            at_jump = self._propagate(lo_amps, hi - lo)
            nrm = np.linalg.norm(at_jump)
            self.state = replace(self.state, amps=at_jump / nrm)
            elapsed += hi
            self._jump(start_t + elapsed)

    # -- event handlers ----------------------------------------------------

    def _enter(self, step: int, rec: AtomRecord) -> None:
        if len(self.slots) + 1 > self.config.resolved_register_cap:
            raise RegisterCapError(
                f"atom {rec.atom_id} at t={step * self.h:.6g}s would raise the "
                f"register to {len(self.slots) + 1}, cap is "
                f"{self.config.resolved_register_cap}"
            )
        self.state = hilbert.attach_atom(
            self.state,
            _PHASE_VALUE[rec.phase],
            self.config.beta_sq,
            self.config.max_amplitudes,
        )
        self.slots.append(rec)
        self._log(step * self.h, "AtomEnter", atom_id=rec.atom_id, phase=rec.phase)

    def _exit(self, step: int, rec: AtomRecord) -> None:
        slot = next(
            i for i, r in enumerate(self.slots) if r.atom_id == rec.atom_id
        )
        self.state, outcome = hilbert.measure_and_remove_atom(
            self.state, slot, self.rng.random()
        )
        self.slots.pop(slot)
        self.threshold = self.rng.random()
        self._log(step * self.h, "AtomExit", atom_id=rec.atom_id,
                  phase=rec.phase, outcome=outcome)

    def _sample(self, step: int) -> None:
        cfg = self.config
        x = self.state.reshaped()
        norm2 = float(np.vdot(x, x).real)
        pops = (np.abs(x) ** 2).sum(axis=1) / norm2
        tail = float(pops[-1] + pops[-2])
        if tail > _TAIL_ABORT:
            raise TailMassError(
                f"tail mass {tail:.3e} exceeds {_TAIL_ABORT} at t={step * self.h:.6g}s; "
                f"raise n_max above {cfg.n_max}"
            )
        n = np.arange(self.nf)
        mean_n = float(n @ pops)
        inner1 = np.einsum("ij,ij->i", x[:-1].conj(), x[1:])
        exp_a = complex((self.sqrt_n[1:] * inner1).sum() / norm2)
        inner2 = np.einsum("ij,ij->i", x[:-2].conj(), x[2:])
        exp_aa = complex(
            (self.sqrt_n[1:-1] * self.sqrt_n[2:] * inner2).sum() / norm2
        )
        x2sum = 1.0 + 2.0 * mean_n
        var_x1 = 0.25 * (x2sum + 2.0 * exp_aa.real) - exp_a.real**2
        var_x2 = 0.25 * (x2sum - 2.0 * exp_aa.real) - exp_a.imag**2
        if self.ref_sqvs is not None:
            f_sqvs = float(
                np.linalg.norm(self.ref_sqvs.conj() @ x) ** 2 / norm2
            )
        else:
            f_sqvs = float(pops[0])
        rho = None
        if cfg.store_rho:
            rho = (x @ x.conj().T) / norm2
        self.samples.append(
            SampleRecord(step * self.h, mean_n, float(var_x1), float(var_x2),
                         f_sqvs, tail, rho)
        )

    def _forced_click(self, step: int) -> None:
        self.state = self.state.normalized()
        self._jump(step * self.h, forced=True)

    # -- main loop ---------------------------------------------------------

    def run(self) -> TrajectoryOutput:
        marks: list[tuple[int, int, AtomRecord | None]] = []
        for rec in self.schedule:
            marks.append((rec.entry_step, _PRIO_ENTER, rec))
            if rec.exit_step <= self.dur_steps:
                marks.append((rec.exit_step, _PRIO_EXIT, rec))
        for s in _sample_steps(self.config, self.h, self.dur_steps):
            marks.append((s, _PRIO_SAMPLE, None))
        for s in self.forced_click_steps:
            marks.append((s, _PRIO_CLICK, None))
        marks.append((self.dur_steps, _PRIO_END, None))
        marks.sort(key=lambda m: (m[0], m[1], m[2].atom_id if m[2] else -1))

        self.threshold = self.rng.random()
        now = 0
        for step, prio, rec in marks:
            self._advance(now, step)
            now = step
            if prio == _PRIO_CLICK:
                self._forced_click(step)
            elif prio == _PRIO_EXIT:
                self._exit(step, rec)
            elif prio == _PRIO_ENTER:
                self._enter(step, rec)
            elif prio == _PRIO_SAMPLE:
                self._sample(step)
        return TrajectoryOutput(
            config=self.config,
            schedule=self.schedule,
            events=self.events,
            samples=self.samples,
            heralds=self.heralds,
        )


def run_trajectory(
    config: SimConfig,
    rng: np.random.Generator | None = None,
    forced_click_steps: tuple[int, ...] = (),
) -> TrajectoryOutput:
    """Run one stochastic trajectory.

    Identical configurations (including the seed) produce identical outputs.
    ``forced_click_steps`` collapses the field with ``a`` at the given grid
    steps, which conditions the ensemble on a herald click at those times.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return _Engine(config, rng, forced_click_steps).run()


def _run_indexed(args: tuple[SimConfig, tuple[int, ...]]) -> TrajectoryOutput:
    cfg, forced = args
    return run_trajectory(cfg, forced_click_steps=forced)


def run_ensemble(
    config: SimConfig,
    n_traj: int,
    jobs: int = 1,
    forced_click_steps: tuple[int, ...] = (),
) -> list[TrajectoryOutput]:
    """Run ``n_traj`` independent trajectories, optionally in worker processes.

    Trajectory ``i`` is seeded with ``derive_trajectory_seed(config.seed, i)``
    and results are returned in index order, so the output stream does not
    depend on ``jobs``.
    """
    tasks = [
        (replace(config, seed=derive_trajectory_seed(config.seed, i)), forced_click_steps)
        for i in range(n_traj)
    ]
    if jobs <= 1:
        return [_run_indexed(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, n_traj // (4 * jobs))
        return list(pool.map(_run_indexed, tasks, chunksize=chunk))


# ---------------------------------------------------------------------------
# restoration dynamics


@dataclass
class RestorationSeries:
    """Ensemble-averaged field states at fixed offsets after a herald click."""

    times: np.ndarray  # offsets from the click, seconds
    rhos: list[np.ndarray]
    pre_click_rho: np.ndarray | None
    interaction_on: bool


def run_restoration(
    config: SimConfig,
    post_click_state: np.ndarray | None = None,
    interaction_on: bool = True,
    horizon: float | None = None,
    n_times: int = 13,
    n_traj: int = 300,
    jobs: int = 1,
) -> RestorationSeries:
    """Field evolution after a photon click, with or without the atom beam.

    With the interaction on, the ensemble is conditioned on a click at the
    end of burn-in: each trajectory is collapsed there with ``a`` and
    continued with the full engine, weighted by its pre-click photon number
    (the click likelihood). With the interaction off, the given post-click
    state relaxes under the exact cavity-damping channel alone.
    """
    horizon = 3.0 * config.tau_c if horizon is None else horizon
    offsets = np.linspace(0.0, horizon, n_times)
    if not interaction_on:
        if post_click_state is None:
            raise ConfigError("interaction_on=False needs a post_click_state")
        rhos = [
            hilbert.damp_field(np.asarray(post_click_state, dtype=complex),
                               math.exp(-config.kappa * t))
            for t in offsets
        ]
        return RestorationSeries(offsets, rhos, None, False)

    h = config.dt / GRID_SUBDIV
    off_steps = max(1, round(offsets[1] / h)) if n_times > 1 else 1
    t0_steps = max(1, round(config.resolved_burn_in / h))
    click_t = t0_steps * h
    sample_steps = [t0_steps + k * off_steps for k in range(n_times)]
    cfg = replace(
        config,
        duration=(sample_steps[-1] + 1) * h,
        sample_times=tuple(s * h for s in sample_steps),
        store_rho=True,
        record_events=False,
    )
    outputs = run_ensemble(cfg, n_traj, jobs=jobs, forced_click_steps=(t0_steps,))

    dim = config.n_max + 1
    acc = [np.zeros((dim, dim), dtype=complex) for _ in range(n_times)]
    pre_acc = np.zeros((dim, dim), dtype=complex)
    w_total = 0.0
    n_arr = np.arange(dim)
    for out in outputs:
        forced = next(hh for hh in out.heralds if hh.forced)
        w = float(n_arr @ np.diag(forced.pre_jump_rho).real)
        w_total += w
        pre_acc += w * forced.pre_jump_rho
        by_step = {round(s.t / h): s for s in out.samples}
        for k, s_step in enumerate(sample_steps):
            acc[k] += w * by_step[s_step].rho
    rhos = [a / w_total for a in acc]
    times = np.array([(s - t0_steps) * h for s in sample_steps])
    return RestorationSeries(times, rhos, pre_acc / w_total, True)


# ---------------------------------------------------------------------------
# serialization


def _g15(x: float) -> str:
    return f"{x:.15g}"


def write_event_log(events: list[TrajectoryEvent], path) -> None:
    """JSON-lines event log; one event per line, fixed key order."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            aid = "null" if e.atom_id is None else str(e.atom_id)
            phase = "null" if e.phase is None else f'"{e.phase}"'
            outcome = "null" if e.outcome is None else f'"{e.outcome}"'
            detected = "null" if e.detected is None else ("true" if e.detected else "false")
            fh.write(
                f'{{"t":{_g15(e.t)},"kind":"{e.kind}","id":{aid},"phase":{phase},'
                f'"outcome":{outcome},"detected":{detected},'
                f'"mean_n":{_g15(e.mean_n)},"norm":{_g15(e.norm)}}}\n'
            )


def write_samples_csv(samples: list[SampleRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,mean_n,var_x1,var_x2,f_sqvs,tail_mass\n")
        for s in samples:
            fh.write(
                f"{_g15(s.t)},{_g15(s.mean_n)},{_g15(s.var_x1)},"
                f"{_g15(s.var_x2)},{_g15(s.f_sqvs)},{_g15(s.tail_mass)}\n"
            )
