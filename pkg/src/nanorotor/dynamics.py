"""Planar centre-of-mass and rotational dynamics of a rod crossing the cavity.

The rod moves along the cavity axis (z) and spins in the plane containing
the polarisation axis (phi measured from it). The vertical transit enters
only through the Gaussian envelope exp(-2 (v_x t)^2 / w0^2), with the beam
centre crossed at t = 0. Integration is fixed-step classical RK4 so that
runs are bit-reproducible and convergence is easy to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import optics
from .optics import BodyProperties, CavityParams, Material, Polarizability, RodGeometry
from .spectral import dominant_frequency

SPAN_WAISTS = 10.0
STEPS_PER_PERIOD = 200
ENDPOINT_ENVELOPE = 1e-3
CHANNEL_ENVELOPE = 0.5


class IntegrationError(RuntimeError):
    def __init__(self, t: float, state=None):
        super().__init__(f"integration blew up at t = {t!r} s (state {state})")
        self.t = t


class SpanError(ValueError):
    pass


@dataclass(frozen=True)
class RodState:
    t: float
    z: float
    z_dot: float
    phi: float
    phi_dot: float

    @property
    def f_rot(self) -> float:
        return self.phi_dot / (2 * math.pi)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to reproduce one transit.

    ``initial`` holds the state at the start of the span; its ``t`` field is
    replaced by the resolved ``t_start``. ``dt``, ``t_start`` and ``t_end``
    default to values derived from the physics (see :meth:`resolved_dt`).
    """

    cavity: CavityParams
    v_x: float
    initial: RodState
    geometry: RodGeometry = field(default_factory=lambda: RodGeometry(800e-9, 100e-9))
    material: Material = field(default_factory=Material)
    dt: float | None = None
    t_start: float | None = None
    t_end: float | None = None
    particle_kind: str = "rod"

    def __post_init__(self):
        if not self.v_x > 0:
            raise ValueError(f"v_x must be positive, got {self.v_x}")
        if self.particle_kind not in ("rod", "sphere"):
            raise ValueError(f"particle_kind must be 'rod' or 'sphere', got {self.particle_kind!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        t0, t1 = self.span
        if not t1 > t0:
            raise ValueError(f"empty time span [{t0}, {t1}]")

    @property
    def span(self) -> tuple[float, float]:
        half = SPAN_WAISTS * self.cavity.waist / self.v_x
        t0 = -half if self.t_start is None else self.t_start
        t1 = half if self.t_end is None else self.t_end
        return t0, t1

    @property
    def body(self) -> BodyProperties:
        return BodyProperties.of(self.geometry, self.material)

    @property
    def polarizability(self) -> Polarizability:
        """Needle polarizability for a rod; the same-mass (same-volume)
        sphere's scalar value in both slots otherwise, which removes the
        torque and the orientation dependence of the axial force."""
        if self.particle_kind == "sphere":
            return Polarizability.isotropic(
                optics.sphere_polarizability(self.geometry.volume, self.material)
            )
        return optics.needle_polarizability(self.geometry, self.material)

    def start_state(self) -> RodState:
        return replace(self.initial, t=self.span[0])

    def characteristic_frequency(self) -> float:
        """Fastest of: initial rotation rate, small-oscillation trap
        frequency at the strongest coupling, libration frequency."""
        pol, body = self.polarizability, self.body
        freqs = [
            abs(self.initial.phi_dot) / (2 * math.pi),
            optics.trap_frequency(self.cavity, max(pol.alpha_par, pol.alpha_perp), body.mass),
        ]
        if self.particle_kind == "rod":
            freqs.append(optics.libration_frequency(self.cavity, pol, body))
        return max(freqs)

    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        f = self.characteristic_frequency()
        if f > 0:
            return 1.0 / (STEPS_PER_PERIOD * f)
        t0, t1 = self.span
        return (t1 - t0) / 10_000  # nothing oscillates: free flight


@dataclass(frozen=True)
class _Model:
    """Coefficients of the equations of motion, precomputed for speed."""

    accel_z: float
    accel_phi: float
    alpha_perp: float
    anisotropy: float
    k: float
    env_rate: float
    frozen_envelope: float | None

    @classmethod
    def build(cls, config: SimulationConfig, frozen_envelope: float | None = None) -> "_Model":
        cav, pol, body = config.cavity, config.polarizability, config.body
        e2 = cav.field_amplitude**2
        return cls(
            accel_z=e2 * cav.k / (4 * body.mass),
            accel_phi=e2 * pol.anisotropy / (4 * body.inertia),
            alpha_perp=pol.alpha_perp,
            anisotropy=pol.anisotropy,
            k=cav.k,
            env_rate=2 * config.v_x**2 / cav.waist**2,
            frozen_envelope=frozen_envelope,
        )

    def envelope(self, t: float) -> float:
        if self.frozen_envelope is not None:
            return self.frozen_envelope
        return math.exp(-self.env_rate * t * t)

    def derivs(self, t, z, z_dot, phi, phi_dot):
        env = self.envelope(t)
        kz = self.k * z
        c = math.cos(phi)
        ckz = math.cos(kz)
        return (
            z_dot,
            -self.accel_z * (self.alpha_perp + self.anisotropy * c * c) * math.sin(2 * kz) * env,
            phi_dot,
            -self.accel_phi * math.sin(2 * phi) * ckz * ckz * env,
        )

    def rk4(self, t, y, h):
        z, zd, p, pd = y
        f = self.derivs
        h2 = 0.5 * h
        try:
            k1 = f(t, z, zd, p, pd)
            k2 = f(t + h2, z + h2 * k1[0], zd + h2 * k1[1], p + h2 * k1[2], pd + h2 * k1[3])
            k3 = f(t + h2, z + h2 * k2[0], zd + h2 * k2[1], p + h2 * k2[2], pd + h2 * k2[3])
            k4 = f(t + h, z + h * k3[0], zd + h * k3[1], p + h * k3[2], pd + h * k3[3])
        except (OverflowError, ValueError):  # math.sin(inf) and friends
            raise IntegrationError(t, y) from None
        h6 = h / 6
        out = (
            z + h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            zd + h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            p + h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
            pd + h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
        )
        if not all(map(math.isfinite, out)):
            raise IntegrationError(t + h, out)
        return out


@lru_cache(maxsize=64)
def _model(config: SimulationConfig, frozen_envelope: float | None = None) -> _Model:
    return _Model.build(config, frozen_envelope)


def step(state: RodState, config: SimulationConfig, dt: float | None = None) -> RodState:
    """Advance ``state`` by one RK4 step of ``dt`` (default: the config's)."""
    h = config.resolved_dt() if dt is None else dt
    y = _model(config).rk4(state.t, (state.z, state.z_dot, state.phi, state.phi_dot), h)
    return RodState(state.t + h, *y)


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: SimulationConfig
    t: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray

    def __len__(self):
        return self.t.size

    def __getitem__(self, i) -> RodState:
        return RodState(
            float(self.t[i]), float(self.z[i]), float(self.z_dot[i]),
            float(self.phi[i]), float(self.phi_dot[i]),
        )

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def envelope(self) -> np.ndarray:
        cav = self.config.cavity
        return optics.gaussian_envelope(self.t, self.config.v_x, cav.waist)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.z, self.z_dot, self.phi, self.phi_dot])


def simulate(config: SimulationConfig, frozen_envelope: float | None = None) -> Trajectory:
    """Integrate the transit over the configured span.

    The step is shrunk slightly, if needed, so that a whole number of steps
    lands exactly on ``t_end``. With ``frozen_envelope`` the field is held at
    that fraction of its peak for the whole run (energy diagnostics).
    """
    t0, t1 = config.span
    n = max(1, math.ceil((t1 - t0) / config.resolved_dt() - 1e-9))
    h = (t1 - t0) / n
    model = _Model.build(config, frozen_envelope)
    s = config.start_state()
    y = (s.z, s.z_dot, s.phi, s.phi_dot)
    out = np.empty((n + 1, 4))
    out[0] = y
    for i in range(n):
        y = model.rk4(t0 + i * h, y, h)
        out[i + 1] = y
    t = t0 + h * np.arange(n + 1)
    t[-1] = t1
    return Trajectory(config, t, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(), out[:, 3].copy())


def total_energy(state: RodState, config: SimulationConfig, frozen_envelope: float) -> float:
    """Kinetic plus optical potential energy with the envelope held fixed;
    a constant of motion only in that frozen case."""
    body = config.body
    u = optics.optical_potential(state.z, state.phi, frozen_envelope, config.cavity, config.polarizability)
    return 0.5 * body.mass * state.z_dot**2 + 0.5 * body.inertia * state.phi_dot**2 + float(u)


def antinode_index(z, cav: CavityParams):
    """Index m of the nearest antinode z = m pi / k."""
    return np.rint(np.asarray(z) * cav.k / math.pi).astype(int)


@dataclass(frozen=True)
class Channelling:
    channelled: bool
    n_antinode_hops: int
    trap_frequency: float | None
    reason: str = ""


def _central_window(mask: np.ndarray) -> slice | None:
    """Longest contiguous run of True in ``mask``."""
    if not mask.any():
        return None
    edges = np.diff(np.concatenate([[0], mask.astype(int), [0]]))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    j = int(np.argmax(stops - starts))
    return slice(starts[j], stops[j])


def classify_channelling(traj: Trajectory, envelope_threshold: float = CHANNEL_ENVELOPE) -> Channelling:
    """Decide whether the rod was held in a single antinode near the beam centre.

    Channelled means z stays within lambda/8 of one antinode for the whole
    window where the envelope exceeds ``envelope_threshold``. Hops count
    changes of the nearest-antinode index inside that window. The trap
    frequency is the dominant oscillation frequency of z about the antinode
    and is reported whenever the rod stays in one well (no hops).
    """
    cav = traj.config.cavity
    win = _central_window(traj.envelope > envelope_threshold)
    if win is None:
        return Channelling(False, 0, None, "envelope never exceeds threshold")
    z = traj.z[win]
    idx = antinode_index(z, cav)
    hops = int(np.count_nonzero(np.diff(idx)))
    offset = z - idx * (cav.wavelength / 2)
    channelled = hops == 0 and bool(np.all(np.abs(offset) <= cav.wavelength / 8))
    if hops:
        return Channelling(channelled, hops, None, "rod hops between antinodes")
    f = dominant_frequency(offset, 1.0 / traj.dt)
    reason = "" if f is not None else "window too short for a spectral estimate"
    return Channelling(channelled, hops, f, reason)


@dataclass(frozen=True)
class TransitSummary:
    v_z_in: float
    v_z_out: float
    f_rot_in: float
    f_rot_out: float
    channelled: bool
    n_antinode_hops: int
    trap_frequency: float | None

    @property
    def rotation_ratio(self) -> float:
        """|f_rot_out| / |f_rot_in|; rates, so direction is discarded."""
        return abs(self.f_rot_out) / abs(self.f_rot_in)

    @property
    def velocity_ratio(self) -> float:
        """|v_z_out| / |v_z_in|."""
        return abs(self.v_z_out) / abs(self.v_z_in)


def transit_summary(traj: Trajectory) -> TransitSummary:
    env = traj.envelope
    if env[0] >= ENDPOINT_ENVELOPE or env[-1] >= ENDPOINT_ENVELOPE:
        raise SpanError(
            f"envelope at trajectory ends ({env[0]:.3g}, {env[-1]:.3g}) not below {ENDPOINT_ENVELOPE}"
        )
    ch = classify_channelling(traj)
    first, last = traj[0], traj[-1]
    return TransitSummary(
        v_z_in=first.z_dot,
        v_z_out=last.z_dot,
        f_rot_in=first.f_rot,
        f_rot_out=last.f_rot,
        channelled=ch.channelled,
        n_antinode_hops=ch.n_antinode_hops,
        trap_frequency=ch.trap_frequency,
    )


def reversed_config(traj: Trajectory) -> SimulationConfig:
    """Config that replays ``traj`` backwards in time.

    The envelope is even in t, so starting from the final state with both
    velocities negated and running over the mirrored span retraces the path.
    """
    t0, t1 = traj.config.span
    last = traj[-1]
    initial = RodState(-t1, last.z, -last.z_dot, last.phi, -last.phi_dot)
    return replace(traj.config, initial=initial, dt=traj.dt, t_start=-t1, t_end=-t0)
