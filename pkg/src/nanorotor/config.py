"""Flat ``key = value`` run configuration with dotted parameter paths.

Example::

    # comment
    cavity.field_amplitude = 8.2e6
    v_x = 11.3
    initial.z_dot = 0.28

Floats are written with ``repr`` so parse(serialize(c)) == c exactly.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

from .dynamics import RodState, SimulationConfig
from .optics import CavityParams, Material, RodGeometry

DEFAULT_SWEEP_CAP = 10_000


class ConfigError(ValueError):
    """Bad configuration text. ``line`` and ``key`` point at the culprit."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str | None = None):
        where = [str(source)] if source else []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


def _opt_float(text: str):
    return None if text.lower() == "none" else float(text)


def _opt_int(text: str):
    return None if text.lower() == "none" else int(text)


def _opt_str(text: str):
    return None if text.lower() == "none" else text


# key -> (parser, default); a default of ... marks a required key
FIELDS: dict[str, tuple] = {
    "cavity.wavelength": (float, 1560e-9),
    "cavity.waist": (float, 65e-6),
    "cavity.field_amplitude": (float, 0.0),
    "geometry.length": (float, 800e-9),
    "geometry.diameter": (float, 100e-9),
    "material.epsilon_r": (float, 12.1),
    "material.density": (float, 2329.0),
    "v_x": (float, ...),
    "initial.z": (float, 0.0),
    "initial.z_dot": (float, 0.0),
    "initial.phi": (float, 0.0),
    "initial.phi_dot": (float, 0.0),
    "particle_kind": (str, "rod"),
    "dt": (_opt_float, None),
    "t_start": (_opt_float, None),
    "t_end": (_opt_float, None),
    "synth.sample_rate": (float, 100e6),
    "synth.y_offset": (float, 0.0),
    "synth.noise_rms": (float, 0.0),
    "analysis.window": (str, "hann"),
    "analysis.min_prominence": (float, 0.05),
    "analysis.envelope_threshold": (float, 0.1),
    "output.dir": (_opt_str, None),
    "seed": (_opt_int, None),
}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, text: str, line: int | None = None):
    if key not in FIELDS:
        raise ConfigError("unknown parameter", line, key)
    parser = FIELDS[key][0]
    try:
        value = parser(text)
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {parser.__name__.lstrip('_')}", line, key) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"non-finite value {text!r}", line, key)
    return value


def parse_pairs(text: str, source=None, allow=None) -> list[tuple[int, str, str]]:
    """Split config text into ``(line, key, raw value)`` triples.

    ``allow`` is an optional predicate accepting extra keys (sweep files);
    other unknown keys and duplicates are rejected.
    """
    out, seen = [], {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", no, source=source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", no, key or None, source)
        if key not in FIELDS and not (allow and allow(key)):
            raise ConfigError("unknown parameter", no, key, source)
        if key in seen:
            raise ConfigError(f"duplicate (first set on line {seen[key]})", no, key, source)
        seen[key] = no
        out.append((no, key, value))
    return out


@dataclass(frozen=True)
class RunConfig:
    simulation: SimulationConfig
    sample_rate: float = 100e6
    y_offset: float = 0.0
    noise_rms: float = 0.0
    window: str = "hann"
    min_prominence: float = 0.05
    envelope_threshold: float = 0.1
    out_dir: str | None = None
    seed: int | None = None

    # flat view ---------------------------------------------------------
    def to_flat(self) -> dict:
        s = self.simulation
        return {
            "cavity.wavelength": s.cavity.wavelength,
            "cavity.waist": s.cavity.waist,
            "cavity.field_amplitude": s.cavity.field_amplitude,
            "geometry.length": s.geometry.length,
            "geometry.diameter": s.geometry.diameter,
            "material.epsilon_r": s.material.epsilon_r,
            "material.density": s.material.density,
            "v_x": s.v_x,
            "initial.z": s.initial.z,
            "initial.z_dot": s.initial.z_dot,
            "initial.phi": s.initial.phi,
            "initial.phi_dot": s.initial.phi_dot,
            "particle_kind": s.particle_kind,
            "dt": s.dt,
            "t_start": s.t_start,
            "t_end": s.t_end,
            "synth.sample_rate": self.sample_rate,
            "synth.y_offset": self.y_offset,
            "synth.noise_rms": self.noise_rms,
            "analysis.window": self.window,
            "analysis.min_prominence": self.min_prominence,
            "analysis.envelope_threshold": self.envelope_threshold,
            "output.dir": self.out_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_flat(cls, values: dict) -> "RunConfig":
        """Build from a (possibly partial) flat mapping; missing keys take
        their defaults. Raises ConfigError on missing required keys and
        ValueError on physically invalid values."""
        v = {k: d for k, (_, d) in FIELDS.items()}
        v.update(values)
        missing = [k for k, val in v.items() if val is ...]
        if missing:
            raise ConfigError(f"required parameter missing: {', '.join(missing)}", key=missing[0])
        if v["analysis.window"] not in ("hann", "rectangular"):
            raise ConfigError(f"unknown window {v['analysis.window']!r}", key="analysis.window")
        if not v["synth.sample_rate"] > 0:
            raise ConfigError("must be positive", key="synth.sample_rate")
        sim = SimulationConfig(
            cavity=CavityParams(v["cavity.wavelength"], v["cavity.waist"], v["cavity.field_amplitude"]),
            v_x=v["v_x"],
            initial=RodState(0.0, v["initial.z"], v["initial.z_dot"], v["initial.phi"], v["initial.phi_dot"]),
            geometry=RodGeometry(v["geometry.length"], v["geometry.diameter"]),
            material=Material(v["material.epsilon_r"], v["material.density"]),
            dt=v["dt"],
            t_start=v["t_start"],
            t_end=v["t_end"],
            particle_kind=v["particle_kind"],
        )
        return cls(
            simulation=sim,
            sample_rate=v["synth.sample_rate"],
            y_offset=v["synth.y_offset"],
            noise_rms=v["synth.noise_rms"],
            window=v["analysis.window"],
            min_prominence=v["analysis.min_prominence"],
            envelope_threshold=v["analysis.envelope_threshold"],
            out_dir=v["output.dir"],
            seed=v["seed"],
        )

    def with_values(self, values: dict) -> "RunConfig":
        """Copy with parameters replaced, keys given as dotted paths."""
        flat = self.to_flat()
        for k, val in values.items():
            if k not in FIELDS:
                raise ConfigError("unknown parameter", key=k)
            flat[k] = val
        return RunConfig.from_flat(flat)

    def hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def parse(text: str, source=None) -> RunConfig:
    pairs = parse_pairs(text, source)
    if not pairs:
        raise ConfigError("configuration is empty", source=source)
    values = {key: parse_value(key, raw, no) for no, key, raw in pairs}
    try:
        return RunConfig.from_flat(values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), source=source) from None


def bundled(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``bundled("s1")``."""
    path = Path(__file__).parent / "configs" / (name if name.endswith(".cfg") else f"{name}.cfg")
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def load(path) -> RunConfig:
    path = Path(path)
    return parse(path.read_text(), source=path)


def serialize(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in cfg.to_flat().items())


def dump(cfg: RunConfig, path) -> None:
    Path(path).write_text(serialize(cfg))


# sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of parameter axes over a base config.

    Sweep file keys: ``base = <cfg path>`` (relative to the sweep file),
    ``cap = <int>``, ``sweep.<param> = v1, v2, ...`` for each axis, and any
    plain parameter to override the base.
    """

    base: RunConfig
    axes: tuple[tuple[str, tuple], ...]
    cap: int = DEFAULT_SWEEP_CAP

    def __post_init__(self):
        if self.size > self.cap:
            raise ConfigError(f"sweep has {self.size} combinations, above the cap of {self.cap}", key="cap")

    @property
    def size(self) -> int:
        return math.prod(len(vals) for _, vals in self.axes)

    def points(self) -> list[dict]:
        """Parameter combinations in a fixed order (last axis fastest)."""
        keys = [k for k, _ in self.axes]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


def parse_sweep(text: str, source=None, base_dir=None) -> SweepSpec:
    pairs = parse_pairs(
        text, source, allow=lambda k: k in ("base", "cap") or (k.startswith("sweep.") and k[6:] in FIELDS)
    )
    base_text, cap, overrides, axes = None, DEFAULT_SWEEP_CAP, {}, []
    for no, key, raw in pairs:
        if key == "base":
            p = Path(raw)
            if not p.is_absolute() and base_dir is not None:
                p = Path(base_dir) / p
            try:
                base_text = (p.read_text(), p)
            except OSError as exc:
                raise ConfigError(f"cannot read base config: {exc.strerror}", no, key, source) from None
        elif key == "cap":
            try:
                cap = int(raw)
            except ValueError:
                raise ConfigError(f"cannot read {raw!r} as int", no, key, source) from None
        elif key.startswith("sweep."):
            param = key[6:]
            items = [s.strip() for s in raw.split(",")]
            if not all(items):
                raise ConfigError("empty value in list", no, key, source)
            axes.append((param, tuple(parse_value(param, s, no) for s in items)))
        else:
            overrides[key] = parse_value(key, raw, no)
    if base_text is None:
        raise ConfigError("sweep needs a 'base' config", key="base", source=source)
    if not axes:
        raise ConfigError("sweep defines no 'sweep.<param>' axis", source=source)
    base = parse(*base_text)
    if overrides:
        try:
            base = base.with_values(overrides)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), source=source) from None
    return SweepSpec(base, tuple(axes), cap)


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    return parse_sweep(path.read_text(), source=path, base_dir=path.parent)
