"""Plain-text `key = value` experiment configuration.

Defaults reproduce the reference simulation setup: a 2 GHz carrier
(0.15 m wavelength), half-wavelength spacings, 500 m wall separation,
20 m array offsets, a 15x15 reflecting surface 30 m down the wall,
8x2 antennas, QPSK, Rician factor 1, and -110 dB noise power.
Lines starting with '#' (or inline '# ...' tails) are comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .channel import SystemGeometry
from .pgm import PgmParams
from .sca import ScaParams

METHODS = ("pgm", "sca", "both")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: SystemGeometry = field(
        default_factory=lambda: SystemGeometry(
            wavelength=0.15,
            wall_separation=500.0,
            tx_offset=20.0,
            rx_offset=20.0,
            ris_offset=30.0,
            tx_spacing=0.075,
            rx_spacing=0.075,
            ris_spacing=0.075,
            n_tx=8,
            n_rx=2,
            ris_rows=15,
            ris_cols=15,
            direct_pathloss_exponent=3.0,
            rician_k=1.0,
        )
    )
    modulation_kind: str = "qam"
    modulation_order: int = 4
    max_vectors: int = 4096
    sigma2_db: float = -110.0
    method: str = "both"
    direct_blocked: bool = False
    ris_enabled: bool = True
    n_realizations: int = 30
    n_noise: int = 500
    final_noise: int = 5000
    mi_every: int = 1
    seed: int = 1
    pgm: PgmParams = field(default_factory=PgmParams)
    sca: ScaParams = field(default_factory=ScaParams)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("noise power must convert to a positive linear value")
        if self.mi_every < 0:
            raise ValueError("mi_every must be >= 0")

    @property
    def sigma2(self) -> float:
        """Linear noise power from the dB config value."""
        return 10.0 ** (self.sigma2_db / 10.0)

    @property
    def methods(self) -> tuple[str, ...]:
        return ("pgm", "sca") if self.method == "both" else (self.method,)


# config key -> (dataclass, field, type); geometry/pgm/sca keys are nested
_GEOMETRY_KEYS = {
    f"geometry.{f.name}": f.name for f in fields(SystemGeometry)
}
_PGM_KEYS = {f"pgm.{f.name}": f.name for f in fields(PgmParams)}
_SCA_KEYS = {f"sca.{f.name}": f.name for f in fields(ScaParams)}
_TOP_KEYS = {
    "modulation.kind": "modulation_kind",
    "modulation.order": "modulation_order",
    "modulation.max_vectors": "max_vectors",
    "noise.sigma2_db": "sigma2_db",
    "run.method": "method",
    "run.direct_blocked": "direct_blocked",
    "run.ris_enabled": "ris_enabled",
    "run.n_realizations": "n_realizations",
    "run.n_noise": "n_noise",
    "run.final_noise": "final_noise",
    "run.mi_every": "mi_every",
    "run.seed": "seed",
}


def known_keys() -> tuple[str, ...]:
    return tuple(_GEOMETRY_KEYS) + tuple(_TOP_KEYS) + tuple(_PGM_KEYS) + tuple(_SCA_KEYS)


def _coerce(value: str, target_type: type) -> Any:
    if target_type is bool:
        lowered = str(value).strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean from {value!r}")
    if target_type is int:
        return int(str(value).strip())
    if target_type is float:
        return float(str(value).strip())
    return str(value).strip()


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines into a flat string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(mapping: dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig from flat config keys, defaults elsewhere."""
    base = ExperimentConfig()
    field_types = {
        SystemGeometry: {f.name: f.type for f in fields(SystemGeometry)},
        PgmParams: {f.name: f.type for f in fields(PgmParams)},
        ScaParams: {f.name: f.type for f in fields(ScaParams)},
    }
    type_map = {"int": int, "float": float, "str": str, "bool": bool}

    def typed(cls, name, value):
        if not isinstance(value, str):
            return value
        declared = field_types[cls][name]
        target = type_map[declared] if isinstance(declared, str) else declared
        return _coerce(value, target)

    geometry_kw, pgm_kw, sca_kw, top_kw = {}, {}, {}, {}
    for key, value in mapping.items():
        if key in _GEOMETRY_KEYS:
            name = _GEOMETRY_KEYS[key]
            geometry_kw[name] = typed(SystemGeometry, name, value)
        elif key in _PGM_KEYS:
            name = _PGM_KEYS[key]
            pgm_kw[name] = typed(PgmParams, name, value)
        elif key in _SCA_KEYS:
            name = _SCA_KEYS[key]
            sca_kw[name] = typed(ScaParams, name, value)
        elif key in _TOP_KEYS:
            name = _TOP_KEYS[key]
            hints = {
                "modulation_kind": str,
                "modulation_order": int,
                "max_vectors": int,
                "sigma2_db": float,
                "method": str,
                "direct_blocked": bool,
                "ris_enabled": bool,
                "n_realizations": int,
                "n_noise": int,
                "final_noise": int,
                "mi_every": int,
                "seed": int,
            }
            top_kw[name] = _coerce(value, hints[name]) if isinstance(value, str) else value
        else:
            raise KeyError(f"unknown config key {key!r}")

    return replace(
        base,
        geometry=replace(base.geometry, **geometry_kw),
        pgm=replace(base.pgm, **pgm_kw),
        sca=replace(base.sca, **sca_kw),
        **top_kw,
    )


def load_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
    """Read a config file (optional) and apply overrides on top of it."""
    mapping: dict[str, Any] = {}
    if path is not None:
        mapping.update(parse_config_text(Path(path).read_text()))
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)
