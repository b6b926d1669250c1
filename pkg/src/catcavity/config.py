"""Flat ``key = value`` configuration files with per-subcommand sections.

Format rules:

* ``[section]`` headers group keys; each CLI subcommand reads the section
  of its own name layered over an optional ``[common]`` section.
* one ``key = value`` pair per line; ``#`` starts a comment anywhere.
* values are typed by shape: ``true``/``false``, integers, floats,
  comma-separated lists of the former, anything else is a bare string.
* physical quantities carry their SI unit as a key suffix
  (``kappa_per_s``, ``t_int_s``, ``g_rad_per_s``); dimensionless knobs
  (``beta_sq``, ``kappa_tau_c``, ``eta``) have none.

``parse -> serialize -> parse`` is the identity on the typed document.
"""

from __future__ import annotations

import re

from .errors import ConfigError
from .trajectory import SimConfig

Scalar = bool | int | float | str
Value = Scalar | tuple[Scalar, ...]
ConfigDoc = dict[str, dict[str, Value]]

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_-]+)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INT_RE = re.compile(r"^[+-]?\d+$")


def _parse_scalar(token: str) -> Scalar:
    if token == "true":
        return True
    if token == "false":
        return False
    if _INT_RE.match(token):
        return int(token)
    try:
        return float(token)
    except ValueError:
        return token


def _parse_value(raw: str) -> Value:
    if "," in raw:
        return tuple(_parse_scalar(part.strip()) for part in raw.split(","))
    return _parse_scalar(raw)


def _format_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return str(value)


def _format_value(value: Value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_scalar(v) for v in value)
    return _format_scalar(value)


def parse_config(text: str) -> ConfigDoc:
    """Parse configuration text; raises ConfigError with line diagnostics."""
    doc: ConfigDoc = {}
    section: dict[str, Value] | None = None
    section_name = ""
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            section_name = header.group(1)
            if section_name in doc:
                raise ConfigError(
                    f"line {lineno}: duplicate section [{section_name}]")
            section = {}
            doc[section_name] = section
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if not raw_value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if section is None:
            raise ConfigError(
                f"line {lineno}: key {key!r} appears before any [section]")
        if key in section:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} in [{section_name}]")
        section[key] = _parse_value(raw_value)
    return doc


def serialize_config(doc: ConfigDoc) -> str:
    lines = []
    for section_name, section in doc.items():
        lines.append(f"[{section_name}]")
        for key, value in section.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def parse_config_file(path: str) -> ConfigDoc:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def resolve_section(doc: ConfigDoc, subcommand: str) -> dict[str, Value]:
    """Per-subcommand view: [common] overlaid by [<subcommand>]."""
    merged: dict[str, Value] = {}
    merged.update(doc.get("common", {}))
    merged.update(doc.get(subcommand, {}))
    if not merged:
        raise ConfigError(
            f"config defines neither [common] nor [{subcommand}]")
    return merged


class SectionView:
    """Typed, consume-tracking access to one resolved section."""

    def __init__(self, mapping: dict[str, Value], context: str):
        self._mapping = dict(mapping)
        self._context = context
        self._seen: set[str] = set()

    def _fetch(self, key: str, required: bool, default):
        self._seen.add(key)
        if key in self._mapping:
            return self._mapping[key]
        if required:
            raise ConfigError(f"{self._context}: missing required key {key!r}")
        return default

    def get_float(self, key: str, default: float | None = None,
                  required: bool = False) -> float | None:
        value = self._fetch(key, required, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(
                f"{self._context}: {key!r} must be a number, got {value!r}")
        return float(value)

    def get_int(self, key: str, default: int | None = None,
                required: bool = False) -> int | None:
        value = self._fetch(key, required, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(
                f"{self._context}: {key!r} must be an integer, got {value!r}")
        return value

    def get_bool(self, key: str, default: bool) -> bool:
        value = self._fetch(key, False, default)
        if not isinstance(value, bool):
            raise ConfigError(
                f"{self._context}: {key!r} must be true/false, got {value!r}")
        return value

    def get_str(self, key: str, default: str | None = None,
                required: bool = False) -> str | None:
        value = self._fetch(key, required, default)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError(
                f"{self._context}: {key!r} must be a string, got {value!r}")
        return value

    def get_float_tuple(self, key: str, required: bool = False,
                        ) -> tuple[float, ...] | None:
        value = self._fetch(key, required, None)
        if value is None:
            return None
        if not isinstance(value, tuple):
            value = (value,)
        items = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(
                    f"{self._context}: {key!r} must list numbers, got {item!r}")
            items.append(float(item))
        return tuple(items)

    def reject_unknown(self) -> None:
        unknown = sorted(set(self._mapping) - self._seen)
        if unknown:
            raise ConfigError(
                f"{self._context}: unknown keys {', '.join(unknown)}")


def build_sim_config(view: SectionView, *, seed: int | None = None,
                     default_eta: float = 1.0) -> SimConfig:
    """Assemble a SimConfig from a resolved section.

    ``kappa_per_s`` and ``kappa_tau_c`` are mutually exclusive; exactly one
    must be present. A ``seed`` argument (from the command line) overrides
    the config key.
    """
    g = view.get_float("g_rad_per_s", required=True)
    t_int = view.get_float("t_int_s", required=True)
    beta_sq = view.get_float("beta_sq", required=True)
    mean_atoms = view.get_float("mean_atoms", required=True)
    n_max = view.get_int("n_max", required=True)
    kappa = view.get_float("kappa_per_s")
    kappa_tau_c = view.get_float("kappa_tau_c")
    if (kappa is None) == (kappa_tau_c is None):
        raise ConfigError(
            "exactly one of kappa_per_s and kappa_tau_c must be set")
    eta = view.get_float("eta", default_eta)
    dt = view.get_float("dt_s", t_int / 20.0)
    config_seed = view.get_int("seed", 0)
    stagger_dt = view.get_float("stagger_dt_s")
    sample_interval = view.get_float("sample_interval_s")
    burn_in = view.get_float("burn_in_s")
    burn_in_tau_c = view.get_float("burn_in_tau_c")
    duration = view.get_float("duration_s")
    duration_tau_c = view.get_float("duration_tau_c")
    kwargs = dict(
        g=g,
        t_int=t_int,
        beta_sq=beta_sq,
        mean_atoms=mean_atoms,
        eta=eta,
        n_max=n_max,
        dt=dt,
        seed=seed if seed is not None else config_seed,
        injection_mode=view.get_str("injection_mode", "poisson"),
        stagger_dt=stagger_dt,
        sample_interval=sample_interval,
        burn_in=burn_in,
        duration=duration,
        initial_field=view.get_str("initial_field", "vacuum"),
        store_rho=view.get_bool("store_rho", False),
        record_events=view.get_bool("record_events", True),
        register_cap=view.get_int("register_cap"),
    )
    if kappa is not None:
        sim = SimConfig(kappa=kappa, **kwargs)
    else:
        sim = SimConfig.with_kappa_tau_c(kappa_tau_c=kappa_tau_c, **kwargs)
    # dimensionless time knobs resolve against tau_c, which needs the
    # assembled config; they lose to the explicit _s keys if both appear
    if burn_in is None and burn_in_tau_c is not None:
        sim.burn_in = burn_in_tau_c * sim.tau_c
    if duration is None and duration_tau_c is not None:
        sim.duration = duration_tau_c * sim.tau_c
    sim.validate()
    return sim
