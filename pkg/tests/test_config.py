"""Config parsing, section resolution, and SimConfig assembly."""

import pytest

from catcavity import config
from catcavity.errors import ConfigError

SAMPLE = """\
# global knobs
[common]
g_rad_per_s = 1e6
t_int_s = 1e-7   # transit
beta_sq = 0.3
mean_atoms = 2
n_max = 24
kappa_tau_c = 0.025
store_rho = false

[sweep]
trajectories = 200
beta_sq_values = 0.1, 0.2, 0.3, 0.4
labels = alpha, beta
"""


# ---------------------------------------------------------------------------
# parsing


def test_parse_types_and_sections():
    doc = config.parse_config(SAMPLE)
    assert set(doc) == {"common", "sweep"}
    common = doc["common"]
    assert common["g_rad_per_s"] == 1e6
    assert isinstance(common["mean_atoms"], int) and common["mean_atoms"] == 2
    assert common["store_rho"] is False
    assert doc["sweep"]["trajectories"] == 200
    assert doc["sweep"]["beta_sq_values"] == (0.1, 0.2, 0.3, 0.4)
    assert doc["sweep"]["labels"] == ("alpha", "beta")


def test_comments_and_blank_lines_are_ignored():
    doc = config.parse_config("# lonely comment\n\n[a]\nx = 1 # trailing\n")
    assert doc == {"a": {"x": 1}}


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("[a]\nx = 1\n[a]\ny = 2\n", "line 3: duplicate section"),
        ("[a]\nx = 1\nx = 2\n", "line 3: duplicate key"),
        ("x = 1\n", "line 1: key 'x' appears before any [section]"),
        ("[a]\n9bad = 1\n", "line 2: invalid key"),
        ("[a]\nx =\n", "line 2: empty value"),
        ("[a]\njust words\n", "line 2: expected 'key = value'"),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConfigError, match=None) as err:
        config.parse_config(text)
    assert fragment in str(err.value)


def test_parse_serialize_round_trip():
    doc = config.parse_config(SAMPLE)
    again = config.parse_config(config.serialize_config(doc))
    assert again == doc


def test_parse_config_file_missing(tmp_path):
    with pytest.raises(ConfigError):
        config.parse_config_file(str(tmp_path / "absent.cfg"))


# ---------------------------------------------------------------------------
# section resolution


def test_resolve_section_overlays_common():
    doc = config.parse_config("[common]\na = 1\nb = 2\n[steady]\nb = 3\n")
    merged = config.resolve_section(doc, "steady")
    assert merged == {"a": 1, "b": 3}


def test_resolve_section_requires_some_section():
    doc = config.parse_config("[other]\na = 1\n")
    with pytest.raises(ConfigError):
        config.resolve_section(doc, "steady")


# ---------------------------------------------------------------------------
# typed views


def test_section_view_typing_and_defaults():
    view = config.SectionView(
        {"x": 2, "y": 1.5, "flag": True, "name": "sqvs", "grid": (1, 2.0)},
        "test",
    )
    assert view.get_int("x") == 2
    assert view.get_float("x") == 2.0  # ints promote to floats
    assert view.get_float("y") == 1.5
    assert view.get_bool("flag", False) is True
    assert view.get_str("name") == "sqvs"
    assert view.get_float_tuple("grid") == (1.0, 2.0)
    assert view.get_float("absent", 7.0) == 7.0
    assert view.get_float("absent2") is None
    view.reject_unknown()


def test_section_view_type_errors():
    view = config.SectionView({"x": "words", "b": 1, "f": True}, "test")
    with pytest.raises(ConfigError):
        view.get_float("x")
    with pytest.raises(ConfigError):
        view.get_bool("b", False)
    with pytest.raises(ConfigError):
        view.get_float("f")  # bools are not numbers
    with pytest.raises(ConfigError):
        view.get_int("absent", required=True)


def test_section_view_flags_unknown_keys():
    view = config.SectionView({"known": 1, "typo_key": 2}, "test")
    view.get_int("known")
    with pytest.raises(ConfigError) as err:
        view.reject_unknown()
    assert "typo_key" in str(err.value)


def test_single_value_promotes_to_tuple():
    view = config.SectionView({"vals": 0.3}, "test")
    assert view.get_float_tuple("vals") == (0.3,)


# ---------------------------------------------------------------------------
# SimConfig assembly


def _view(extra="", drop=None):
    text = (
        "[common]\n"
        "g_rad_per_s = 1e6\n"
        "t_int_s = 1e-7\n"
        "beta_sq = 0.3\n"
        "mean_atoms = 2\n"
        "n_max = 24\n" + extra
    )
    doc = config.parse_config(text)
    if drop:
        del doc["common"][drop]
    return config.SectionView(config.resolve_section(doc, "steady"), "steady")


def test_build_sim_config_with_kappa_tau_c():
    sim = config.build_sim_config(_view("kappa_tau_c = 0.025\n"))
    assert sim.kappa_tau_c == pytest.approx(0.025, rel=1e-12)
    assert sim.dt == pytest.approx(1e-7 / 20.0)
    assert sim.eta == 1.0
    assert sim.seed == 0


def test_build_sim_config_with_explicit_kappa():
    sim = config.build_sim_config(_view("kappa_per_s = 8e4\n"))
    assert sim.kappa == 8e4


def test_kappa_keys_are_mutually_exclusive():
    with pytest.raises(ConfigError):
        config.build_sim_config(_view("kappa_per_s = 8e4\nkappa_tau_c = 0.025\n"))
    with pytest.raises(ConfigError):
        config.build_sim_config(_view())


def test_cli_seed_overrides_config_seed():
    view = _view("kappa_tau_c = 0.025\nseed = 5\n")
    assert config.build_sim_config(view).seed == 5
    view = _view("kappa_tau_c = 0.025\nseed = 5\n")
    assert config.build_sim_config(view, seed=9).seed == 9


def test_dimensionless_times_resolve_against_tau_c():
    sim = config.build_sim_config(
        _view("kappa_tau_c = 0.025\nburn_in_tau_c = 4\nduration_tau_c = 6\n")
    )
    assert sim.burn_in == pytest.approx(4.0 * sim.tau_c, rel=1e-12)
    assert sim.duration == pytest.approx(6.0 * sim.tau_c, rel=1e-12)


def test_explicit_seconds_beat_dimensionless_times():
    sim = config.build_sim_config(
        _view("kappa_tau_c = 0.025\nburn_in_s = 1e-6\nburn_in_tau_c = 4\n")
    )
    assert sim.burn_in == 1e-6


def test_build_sim_config_validates_assembled_state():
    with pytest.raises(ConfigError):
        config.build_sim_config(_view("kappa_tau_c = 0.025\neta = 1.5\n"))
