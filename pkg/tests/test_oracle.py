"""Master-equation references and exact pair-transit maps."""

import math

import numpy as np
import pytest

from catcavity import hilbert, oracle, refstates, trajectory
from catcavity.errors import ConfigError, NumericsError
from catcavity.oracle import LindbladSpec


def _zero_h(dim):
    return hilbert.LinearOperator(np.zeros((dim, dim), dtype=complex), hermitian=True)


def _decay_spec(initial, kappa, t_grid):
    dim = initial.shape[0]
    a = hilbert.annihilation(dim - 1).matrix
    return LindbladSpec(
        hamiltonian=_zero_h(dim),
        collapse_ops=(hilbert.LinearOperator(math.sqrt(kappa) * a),),
        initial=initial,
        t_grid=t_grid,
    )


# ---------------------------------------------------------------------------
# integrate_lindblad


def test_single_photon_decay_closed_form():
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[1, 1] = 1.0
    kappa = 3.0e4
    ts = (5e-6, 2e-5, 6e-5)
    rhos = oracle.integrate_lindblad(_decay_spec(rho0, kappa, ts))
    for t, rho in zip(ts, rhos):
        p1 = math.exp(-kappa * t)
        assert rho[1, 1].real == pytest.approx(p1, abs=1e-10)
        assert rho[0, 0].real == pytest.approx(1.0 - p1, abs=1e-10)


def test_coherent_state_stays_coherent_under_decay():
    alpha = 0.9
    vec = refstates.coherent(alpha, 24)
    kappa = 2.0e4
    t = 4e-5
    rho = oracle.integrate_lindblad(
        _decay_spec(np.outer(vec, vec.conj()), kappa, (t,))
    )[0]
    target = refstates.coherent(alpha * math.exp(-0.5 * kappa * t), 24)
    fid = float(np.real(target.conj() @ rho @ target))
    assert fid == pytest.approx(1.0, abs=1e-9)
    m = refstates.field_moments(rho)
    assert m.exp_a.real == pytest.approx(alpha * math.exp(-0.5 * kappa * t), rel=1e-8)


def test_unitary_limit_reproduces_rabi_oscillation():
    n_max = 4
    h = hilbert.effective_hamiltonian(n_max, 1, 1e6, 0.0)
    dim = (n_max + 1) * 2
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[1, 1] = 1.0  # field vacuum, atom excited
    ts = (2e-7, 5e-7, 1.1e-6)
    rhos = oracle.integrate_lindblad(
        LindbladSpec(h, (), rho0, ts)
    )
    for t, rho in zip(ts, rhos):
        want = math.sin(1e6 * t) ** 2
        assert rho[2, 2].real == pytest.approx(want, abs=1e-9)
        assert rho[1, 1].real == pytest.approx(1.0 - want, abs=1e-9)


def test_truncated_initial_trace_is_preserved_not_renormalized():
    # trace 1 - tail must survive the drift check; regression for the
    # check that used to compare against exactly 1
    vec = refstates.squeezed_vacuum(0.8, 34)
    rho0 = np.outer(vec, vec.conj())
    deficit = 1.0 - float(np.trace(rho0).real)
    assert 1e-8 < deficit < 1e-6
    rho = oracle.integrate_lindblad(_decay_spec(rho0, 1e4, (2e-5,)))[0]
    assert np.trace(rho).real == pytest.approx(np.trace(rho0).real, abs=1e-9)


def test_dimension_cap_is_enforced():
    rho0 = np.zeros((6, 6), dtype=complex)
    rho0[0, 0] = 1.0
    with pytest.raises(ConfigError):
        oracle.integrate_lindblad(_decay_spec(rho0, 1e4, (1e-6,)), dim_cap=4)


@pytest.mark.parametrize(
    "mutate",
    [
        "nonhermitian_h",
        "bad_trace",
        "bad_grid",
        "dim_mismatch",
    ],
)
def test_spec_validation_rejects_malformed_problems(mutate):
    dim = 4
    h = _zero_h(dim)
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    grid = (1e-6,)
    if mutate == "nonhermitian_h":
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 1] = 1.0
        h = hilbert.LinearOperator(m)
    elif mutate == "bad_trace":
        rho0 = 0.5 * rho0
    elif mutate == "bad_grid":
        grid = (2e-6, 1e-6)
    elif mutate == "dim_mismatch":
        rho0 = np.eye(5, dtype=complex) / 5.0
    with pytest.raises(ConfigError):
        LindbladSpec(h, (), rho0, grid).validate()


# ---------------------------------------------------------------------------
# squeezed-frame relaxation


def test_squeezed_frame_collapse_annihilates_sqvs():
    r = 0.6
    n_max = refstates.cutoff_for_tail(r, 1e-14, extra_photons=2)
    b = oracle.squeezed_frame_collapse(r, n_max)
    vec = refstates.squeezed_vacuum(r, n_max)
    out = b @ vec
    assert np.linalg.norm(out[:-2]) < 1e-10


def test_frame_decay_fixed_point_is_sqvs():
    r = 0.5
    n_max = refstates.cutoff_for_tail(r, 1e-12, extra_photons=2)
    vec = refstates.squeezed_vacuum(r, n_max)
    rho0 = np.outer(vec, vec.conj())
    tau_c = 1e-5
    rhos = oracle.effective_squeezed_frame_decay(r, tau_c, rho0, (2e-5, 5e-5))
    for rho in rhos:
        fid = float(np.real(vec.conj() @ rho @ vec))
        assert fid == pytest.approx(1.0, abs=1e-9)


def test_frame_quanta_decay_exponentially_from_vacuum():
    # d<b+b>/dt = -<b+b>/tau_c exactly, with <b+b>(0) = sinh^2 r on vacuum
    r = 0.55
    n_max = refstates.cutoff_for_tail(r, 1e-12, extra_photons=4)
    rho0 = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho0[0, 0] = 1.0
    tau_c = 2e-5
    ts = (5e-6, 2e-5, 4e-5)
    rhos = oracle.effective_squeezed_frame_decay(r, tau_c, rho0, ts)
    for t, rho in zip(ts, rhos):
        got = refstates.squeezed_frame_quanta(rho, r)
        want = math.sinh(r) ** 2 * math.exp(-t / tau_c)
        assert got == pytest.approx(want, rel=1e-8)


def test_frame_decay_rejects_bad_tau():
    with pytest.raises(ConfigError):
        oracle.effective_squeezed_frame_decay(0.5, 0.0, np.eye(2, dtype=complex) / 2, (1e-6,))


# ---------------------------------------------------------------------------
# pair kick maps


def test_kick_map_is_identity_at_zero_coupling():
    vec = refstates.coherent(0.7, 14)
    rho = np.outer(vec, vec.conj())
    out = oracle.pairwise_kick_map(0.3, 0.0, 1e-7, field=rho)
    assert np.allclose(out, rho, atol=1e-12)


def test_kick_map_fixes_the_squeezed_vacuum():
    beta_sq = 0.3
    r = refstates.r_for_beta_sq(beta_sq)
    n_max = refstates.cutoff_for_tail(r, 1e-12, extra_photons=2)
    vec = refstates.squeezed_vacuum(r, n_max)
    out = oracle.pairwise_kick_map(beta_sq, 3e6, 1e-7, field=vec)
    fid = float(np.real(vec.conj() @ out @ vec))
    assert fid == pytest.approx(1.0, abs=1e-9)


def test_staggered_kick_map_approaches_simultaneous_limit():
    vec = refstates.coherent(0.5, 12)
    sim = oracle.pairwise_kick_map(0.3, 1e6, 1e-7, field=vec)
    stag = oracle.pairwise_kick_map(
        0.3, 1e6, 1e-7, mode="staggered", stagger_dt=1e-12, field=vec
    )
    assert np.allclose(stag, sim, atol=1e-5)


def test_staggered_kick_map_validates_offset():
    vec = refstates.coherent(0.5, 10)
    with pytest.raises(ConfigError):
        oracle.pairwise_kick_map(0.3, 1e6, 1e-7, mode="staggered", field=vec)
    with pytest.raises(ConfigError):
        oracle.pairwise_kick_map(
            0.3, 1e6, 1e-7, mode="staggered", stagger_dt=2e-7, field=vec
        )
    with pytest.raises(ConfigError):
        oracle.pairwise_kick_map(0.3, 1e6, 1e-7, mode="diagonal", field=vec)


# ---------------------------------------------------------------------------
# paired-injection master equation


def test_injection_series_matches_iterated_kick_map_without_decay():
    n_max = 14
    beta_sq, g, t_int = 0.25, 1e6, 1e-7
    series = oracle.paired_injection_series(n_max, g, 0.0, t_int, beta_sq, 3)
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[0, 0] = 1.0
    for got in series:
        rho = oracle.pairwise_kick_map(beta_sq, g, t_int, field=rho)
        assert np.allclose(got, rho, atol=1e-9)


def test_injection_series_keeps_trace_and_builds_photons():
    series = oracle.paired_injection_series(14, 1e6, 8e3, 1e-7, 0.3, 4)
    n = np.arange(15)
    mean_prev = 0.0
    for rho in series:
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-8)
        mean = float(n @ np.diag(rho).real)
        assert mean > mean_prev
        mean_prev = mean


def test_trajectory_ensemble_agrees_with_injection_series():
    # the unraveling and the master equation must share every moment; a
    # 3-sigma band on mean_n catches gross bias cheaply
    n_max, beta_sq, g, t_int = 16, 0.3, 1e6, 1e-7
    kappa = 8e3
    n_passes, n_traj = 2, 80
    cfg = trajectory.SimConfig(
        g=g,
        kappa=kappa,
        t_int=t_int,
        beta_sq=beta_sq,
        mean_atoms=2.0,
        eta=1.0,
        n_max=n_max,
        dt=5e-9,
        seed=20260815,
        injection_mode="paired_simultaneous",
        duration=n_passes * t_int,
        burn_in=0.0,
        sample_times=(n_passes * t_int,),
        record_events=False,
    )
    outs = trajectory.run_ensemble(cfg, n_traj, jobs=1)
    means = np.array([out.samples[-1].mean_n for out in outs])
    ref = oracle.paired_injection_series(
        n_max, g, kappa, t_int, beta_sq, n_passes
    )[-1]
    want = float(np.arange(n_max + 1) @ np.diag(ref).real)
    se = means.std(ddof=1) / math.sqrt(n_traj)
    assert abs(means.mean() - want) < 3.0 * se + 1e-9
