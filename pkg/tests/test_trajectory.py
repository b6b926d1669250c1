"""Trajectory engine: determinism, scheduling, heralds, and serialization."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from catcavity import hilbert, refstates, trajectory
from catcavity.errors import ConfigError, RegisterCapError, TailMassError
from catcavity.trajectory import SimConfig


def base_config(**overrides):
    kwargs = dict(
        g=1e6,
        kappa=0.0,
        t_int=1e-7,
        beta_sq=0.3,
        mean_atoms=2.0,
        eta=1.0,
        n_max=16,
        dt=5e-9,
        seed=101,
    )
    kwargs.update(overrides)
    return SimConfig(**kwargs)


# ---------------------------------------------------------------------------
# configuration


def test_characteristic_rate_formula():
    got = trajectory.characteristic_rate(0.5, 2.0, 1e6, 1e-7)
    assert got == pytest.approx(math.exp(-1.0) * 2.0 * 1e12 * 1e-7, rel=1e-12)


def test_config_derived_quantities():
    cfg = base_config(kappa=8e4)
    r = refstates.r_for_beta_sq(0.3)
    assert cfg.r == pytest.approx(r, rel=1e-12)
    rate = trajectory.characteristic_rate(r, 2.0, 1e6, 1e-7)
    assert cfg.tau_c == pytest.approx(1.0 / rate, rel=1e-12)
    assert cfg.kappa_tau_c == pytest.approx(8e4 / rate, rel=1e-12)
    assert cfg.g_t_int == pytest.approx(0.1, rel=1e-12)
    assert cfg.resolved_burn_in == pytest.approx(10.0 * cfg.tau_c, rel=1e-12)
    assert cfg.resolved_duration == pytest.approx(20.0 * cfg.tau_c, rel=1e-12)
    assert cfg.resolved_sample_interval == pytest.approx(cfg.tau_c / 20.0, rel=1e-12)


def test_with_kappa_tau_c_targets_dimensionless_decay():
    cfg = SimConfig.with_kappa_tau_c(
        0.025,
        g=1e6,
        t_int=1e-7,
        beta_sq=0.3,
        mean_atoms=2.0,
        eta=1.0,
        n_max=16,
        dt=5e-9,
        seed=3,
    )
    assert cfg.kappa_tau_c == pytest.approx(0.025, rel=1e-12)


@pytest.mark.parametrize(
    "overrides",
    [
        dict(beta_sq=0.5),
        dict(beta_sq=-0.1),
        dict(eta=1.5),
        dict(n_max=1),
        dict(dt=0.0),
        dict(injection_mode="burst"),
        dict(injection_mode="paired_simultaneous", mean_atoms=3.0),
        dict(injection_mode="paired_staggered", mean_atoms=2.0),
        dict(injection_mode="paired_staggered", mean_atoms=2.0, stagger_dt=2e-7),
        dict(initial_field="thermal"),
        dict(register_cap=3),
    ],
)
def test_validate_rejections(overrides):
    with pytest.raises(ConfigError):
        base_config(**overrides).validate()


def test_register_cap_defaults_to_poisson_headroom():
    assert base_config().resolved_register_cap == math.ceil(2.0 + 6.0 * math.sqrt(2.0))


def test_register_cap_respects_amplitude_budget():
    cfg = base_config(n_max=16, max_amplitudes=17 * 2**5)
    assert cfg.resolved_register_cap == 5


def test_trajectory_seeds_are_stable_and_distinct():
    seeds = [trajectory.derive_trajectory_seed(42, i) for i in range(32)]
    assert len(set(seeds)) == 32
    assert seeds[7] == trajectory.derive_trajectory_seed(42, 7)
    assert trajectory.derive_trajectory_seed(43, 7) != seeds[7]


# ---------------------------------------------------------------------------
# schedules


def test_poisson_schedule_alternates_phases():
    out = trajectory.run_trajectory(
        base_config(duration=3e-6, record_events=False, burn_in=1e-5)
    )
    assert len(out.schedule) > 20
    for rec in out.schedule:
        assert rec.phase == ("0" if rec.atom_id % 2 == 0 else "pi")
        assert rec.exit_step - rec.entry_step == round(1e-7 / (5e-9 / 64))


def test_paired_simultaneous_schedule_is_synchronous():
    out = trajectory.run_trajectory(
        base_config(
            injection_mode="paired_simultaneous",
            duration=5e-7,
            record_events=False,
            burn_in=1e-5,
        )
    )
    for first, second in zip(out.schedule[::2], out.schedule[1::2]):
        assert first.entry_step == second.entry_step
        assert {first.phase, second.phase} == {"0", "pi"}


def test_paired_staggered_schedule_offsets_partners():
    h = 5e-9 / 64
    out = trajectory.run_trajectory(
        base_config(
            injection_mode="paired_staggered",
            stagger_dt=4e-8,
            duration=6e-7,
            record_events=False,
            burn_in=1e-5,
        )
    )
    for first, second in zip(out.schedule[::2], out.schedule[1::2]):
        assert second.entry_step - first.entry_step == round(4e-8 / h)


# ---------------------------------------------------------------------------
# determinism


def test_identical_configs_replay_identical_runs():
    cfg = base_config(kappa=8e4, duration=1.2e-5, burn_in=0.0, sample_interval=2e-6)
    a = trajectory.run_trajectory(cfg)
    b = trajectory.run_trajectory(cfg)
    assert a.events == b.events
    assert len(a.samples) == len(b.samples)
    for sa, sb in zip(a.samples, b.samples):
        assert (sa.t, sa.mean_n, sa.var_x1, sa.var_x2, sa.f_sqvs) == (
            sb.t,
            sb.mean_n,
            sb.var_x1,
            sb.var_x2,
            sb.f_sqvs,
        )


def test_ensemble_is_independent_of_worker_count():
    cfg = base_config(kappa=8e4, duration=6e-6, burn_in=0.0, sample_interval=2e-6)
    serial = trajectory.run_ensemble(cfg, 4, jobs=1)
    parallel = trajectory.run_ensemble(cfg, 4, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.events == b.events
        assert [s.t for s in a.samples] == [s.t for s in b.samples]
        assert [s.mean_n for s in a.samples] == [s.mean_n for s in b.samples]


# ---------------------------------------------------------------------------
# heralds and jumps


def herald_run(eta=1.0, seed=7):
    cfg = base_config(
        kappa=8e4,
        eta=eta,
        seed=seed,
        duration=5e-5,
        burn_in=1e-4,
        store_rho=False,
    )
    return trajectory.run_ensemble(cfg, 6, jobs=1)


def test_heralds_record_the_collapse():
    outs = herald_run()
    a = hilbert.annihilation(16).matrix
    n_heralds = 0
    for out in outs:
        for h in out.heralds:
            n_heralds += 1
            assert h.detected  # eta = 1
            collapsed = a @ h.pre_jump_rho @ a.conj().T
            collapsed = collapsed / np.trace(collapsed).real
            assert np.allclose(collapsed, h.rho, atol=1e-9)
    assert n_heralds >= 2


def test_eta_zero_marks_jumps_undetected():
    outs = herald_run(eta=0.0)
    heralds = [h for out in outs for h in out.heralds]
    assert heralds
    assert all(not h.detected for h in heralds)
    assert all(not out.detected_heralds for out in outs)


def test_jump_events_are_logged():
    outs = herald_run()
    kinds = {e.kind for out in outs for e in out.events}
    assert kinds == {"AtomEnter", "AtomExit", "PhotonJump"}
    for out in outs:
        assert len([e for e in out.events if e.kind == "PhotonJump"]) == len(out.heralds)


def test_forced_click_is_recorded_and_detected():
    cfg = base_config(eta=0.3, duration=2e-6, burn_in=1e-5, record_events=False)
    h_grid = cfg.dt / trajectory.GRID_SUBDIV
    step = round(1e-6 / h_grid)
    out = trajectory.run_trajectory(cfg, forced_click_steps=(step,))
    forced = [h for h in out.heralds if h.forced]
    assert len(forced) == 1
    assert forced[0].detected
    assert forced[0].t == pytest.approx(step * h_grid, rel=1e-12)


# ---------------------------------------------------------------------------
# physics invariants the engine must keep


def test_vacuum_with_unexcited_atoms_is_inert():
    cfg = base_config(
        beta_sq=0.0,
        n_max=8,
        duration=2e-6,
        burn_in=1e-6,
        sample_interval=2e-7,
    )
    out = trajectory.run_trajectory(cfg)
    assert not out.heralds
    for s in out.samples:
        assert s.mean_n == pytest.approx(0.0, abs=1e-12)
        assert s.f_sqvs == pytest.approx(1.0, abs=1e-12)


def test_sqvs_with_pairs_is_stationary():
    # SqVS(r) x (opposite-phase pair) is an exact eigenstate of the pair
    # coupling, so the fidelity must hold to roundoff at any gt
    beta_sq = 0.3
    r = refstates.r_for_beta_sq(beta_sq)
    n_max = refstates.cutoff_for_tail(r, 1e-12, extra_photons=2)
    cfg = base_config(
        g=3e6,
        beta_sq=beta_sq,
        n_max=n_max,
        injection_mode="paired_simultaneous",
        initial_field="sqvs",
        duration=6e-7,
        burn_in=0.0,
        sample_interval=1e-7,
        record_events=False,
    )
    out = trajectory.run_trajectory(cfg)
    assert not out.heralds
    assert len(out.samples) >= 6
    for s in out.samples:
        assert s.f_sqvs > 1.0 - 1e-8


def test_sampling_grid_honors_burn_in_and_interval():
    cfg = base_config(
        beta_sq=0.0,
        n_max=8,
        burn_in=1e-6,
        sample_interval=2e-7,
        duration=2e-6,
    )
    out = trajectory.run_trajectory(cfg)
    times = [s.t for s in out.samples]
    assert len(times) == 6
    assert times[0] == pytest.approx(1e-6, rel=1e-12)
    assert times[-1] == pytest.approx(2e-6, rel=1e-12)
    for dt in np.diff(times):
        assert dt == pytest.approx(2e-7, rel=1e-12)


def test_explicit_sample_times_are_snapped_to_grid():
    h_grid = 5e-9 / trajectory.GRID_SUBDIV
    cfg = base_config(
        beta_sq=0.0,
        n_max=8,
        duration=1e-6,
        sample_times=(3.33e-7, 3.33e-7, 7.77e-7),
    )
    out = trajectory.run_trajectory(cfg)
    assert len(out.samples) == 2  # duplicates collapse on the grid
    for s, want in zip(out.samples, (3.33e-7, 7.77e-7)):
        assert s.t == pytest.approx(round(want / h_grid) * h_grid, rel=1e-12)


# ---------------------------------------------------------------------------
# aborts


def test_overfull_cutoff_aborts_with_tail_error():
    cfg = base_config(
        beta_sq=0.4,
        n_max=4,
        duration=1e-5,
        burn_in=0.0,
        sample_interval=5e-7,
    )
    with pytest.raises(TailMassError):
        trajectory.run_trajectory(cfg)


def test_register_overflow_aborts_with_cap_error():
    cfg = base_config(
        g=1.0,
        beta_sq=0.0,
        mean_atoms=1.0,
        n_max=2,
        register_cap=4,
        duration=4e-5,
        burn_in=1e-3,
        record_events=False,
        seed=0,
    )
    with pytest.raises(RegisterCapError):
        trajectory.run_trajectory(cfg)


# ---------------------------------------------------------------------------
# restoration helper


def test_restoration_off_needs_state():
    with pytest.raises(ConfigError):
        trajectory.run_restoration(base_config(kappa=8e4), interaction_on=False)


def test_restoration_off_is_pure_damping():
    cfg = base_config(kappa=8e4)
    one = np.zeros((17, 17), dtype=complex)
    one[1, 1] = 1.0
    series = trajectory.run_restoration(
        cfg, post_click_state=one, interaction_on=False, horizon=2e-5, n_times=5
    )
    assert not series.interaction_on
    n = np.arange(17)
    for t, rho in zip(series.times, series.rhos):
        mean_n = float(n @ np.diag(rho).real)
        assert mean_n == pytest.approx(math.exp(-8e4 * t), rel=1e-10)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# serialization


def test_event_log_format(tmp_path):
    out = herald_run()[0]
    path = tmp_path / "events.jsonl"
    trajectory.write_event_log(out.events, path)
    lines = path.read_text().splitlines()
    assert len(lines) == len(out.events)
    for line, event in zip(lines, out.events):
        obj = json.loads(line)
        assert list(obj.keys()) == [
            "t",
            "kind",
            "id",
            "phase",
            "outcome",
            "detected",
            "mean_n",
            "norm",
        ]
        assert obj["t"] == float(f"{event.t:.15g}")
        assert obj["kind"] == event.kind
        assert obj["id"] == event.atom_id
        assert obj["detected"] == event.detected


def test_samples_csv_format(tmp_path):
    cfg = base_config(
        beta_sq=0.0, n_max=8, burn_in=0.0, sample_interval=5e-7, duration=2e-6
    )
    out = trajectory.run_trajectory(cfg)
    path = tmp_path / "samples.csv"
    trajectory.write_samples_csv(out.samples, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,mean_n,var_x1,var_x2,f_sqvs,tail_mass"
    assert len(lines) == 1 + len(out.samples)
    cells = lines[1].split(",")
    assert len(cells) == 6
    assert float(cells[4]) == pytest.approx(1.0, abs=1e-12)
