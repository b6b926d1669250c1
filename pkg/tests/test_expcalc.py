"""Cavity parameter derivation against the published reference sets."""

import math
from dataclasses import replace

import pytest

from catcavity import expcalc
from catcavity.errors import ConfigError


def set1_params():
    return expcalc.ExperimentalParams(
        finesse=1.0e6,
        cavity_length=5.0e-3,
        mirror_radius=10.0e-3,
        velocity=400.0,
        mean_atoms=8.0,
        beta_sq=0.34,
    )


def test_waist_and_coupling_spot_values():
    d = expcalc.derive_cavity(set1_params())
    # w0^2 = (lambda / 2 pi) sqrt(L (2R - L)) with L = 5 mm, R = 10 mm
    want_waist = math.sqrt(
        (555.6e-9 / (2.0 * math.pi)) * math.sqrt(5.0e-3 * 15.0e-3)
    )
    assert d.waist == pytest.approx(want_waist, rel=1e-12)
    assert d.waist == pytest.approx(27.7e-6, rel=2e-2)
    assert d.mode_volume == pytest.approx(
        0.25 * math.pi * want_waist**2 * 5.0e-3, rel=1e-12
    )
    assert d.g == pytest.approx(2.05e6, rel=2e-2)
    assert d.t_int == pytest.approx(math.sqrt(math.pi) * d.waist / 400.0, rel=1e-12)
    assert d.kappa == pytest.approx(
        2.0 * math.pi * (expcalc.SPEED_OF_LIGHT / 1.0e-2) / 1.0e6, rel=1e-12
    )


@pytest.mark.parametrize("ref", expcalc.REFERENCE_SETS, ids=lambda r: r.label)
def test_reference_sets_are_reproduced(ref):
    d = expcalc.derive_cavity(ref.params())
    assert abs(d.g_t_int / ref.listed_g_t_int - 1.0) < 0.10
    assert abs(d.kappa_tau_c / ref.listed_kappa_tau_c - 1.0) < 0.20


def test_reference_sets_share_geometry_and_transit():
    derived = [expcalc.derive_cavity(ref.params()) for ref in expcalc.REFERENCE_SETS]
    for d in derived[1:]:
        assert d.g == derived[0].g
        assert d.t_int == derived[0].t_int


def test_kappa_scales_inversely_with_finesse():
    lo = expcalc.derive_cavity(set1_params())
    hi = expcalc.derive_cavity(replace(set1_params(), finesse=4.0e6))
    assert hi.kappa == pytest.approx(lo.kappa / 4.0, rel=1e-12)


def test_unstable_resonator_is_rejected():
    with pytest.raises(ConfigError):
        expcalc.derive_cavity(replace(set1_params(), cavity_length=25.0e-3))


def test_negative_knob_is_rejected():
    with pytest.raises(ConfigError):
        expcalc.derive_cavity(replace(set1_params(), velocity=-1.0))
    with pytest.raises(ConfigError):
        expcalc.derive_cavity(replace(set1_params(), beta_sq=0.5))


def test_equivalent_configs_hold_the_product_fixed():
    base = set1_params()
    configs = expcalc.equivalent_configs(base)
    assert len(configs) == 7
    product = base.finesse * base.mean_atoms
    for cfg in configs:
        assert cfg.finesse * cfg.mean_atoms == pytest.approx(product, rel=1e-12)
        assert cfg.beta_sq == base.beta_sq
    atoms = [cfg.mean_atoms for cfg in configs]
    assert atoms == [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]


def test_equivalent_configs_preserve_kappa_tau_c_exactly():
    base = replace(set1_params(), finesse=16.0e6, beta_sq=0.41)
    ktc0 = expcalc.derive_cavity(base).kappa_tau_c
    for cfg in expcalc.equivalent_configs(base):
        assert expcalc.derive_cavity(cfg).kappa_tau_c == pytest.approx(
            ktc0, rel=1e-12
        )
    # the single-photon regime trade: 16e6 finesse with 8 atoms stretches
    # to 1e6 finesse with 128 atoms
    stretched = expcalc.equivalent_configs(base)[-1]
    assert stretched.finesse == pytest.approx(1.0e6)
    assert stretched.mean_atoms == 128.0


def test_reference_table_rows_and_csv():
    rows = expcalc.reference_table()
    assert [r.label for r in rows] == [
        "set1",
        "set2",
        "set3",
        "set4",
        "set5",
        "set6",
    ]
    text = expcalc.format_table_csv(rows)
    lines = text.splitlines()
    assert lines[0] == expcalc.TABLE_CSV_HEADER
    assert len(lines) == 7
    cells = lines[1].split(",")
    assert len(cells) == 9
    assert cells[0] == "set1"
    assert float(cells[3]) == pytest.approx(rows[0].derived.g_t_int, rel=1e-8)
    assert float(cells[8]) == pytest.approx(rows[0].kappa_tau_c_rel_err, rel=1e-6)


def test_table_row_relative_errors():
    rows = expcalc.reference_table()
    for row in rows:
        assert row.g_t_int_rel_err == pytest.approx(
            row.derived.g_t_int / row.listed_g_t_int - 1.0, rel=1e-12
        )
