"""Light scattered by a dielectric needle in the standing wave, and the
detector traces synthesised from simulated trajectories.

Fixed geometry: cavity axis e_z, field polarisation e_x, detection along
e_y. The constant prefactor k^4 D^4 L^2 ((eps-1)/(eps+1))^2 is left out of
:func:`scattering_intensity` (see :func:`scattering_prefactor`); every
downstream consumer works with normalised traces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dynamics import Trajectory
from .optics import CavityParams, Material, RodGeometry

NYQUIST_GUARD = 20.0


class AliasingError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Orientation:
    n: tuple[float, float, float]

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.n))
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"orientation must be a unit vector, |n| = {norm!r}")

    @classmethod
    def planar(cls, phi: float) -> "Orientation":
        """Rod axis in the x-y plane at angle ``phi`` from the polarisation."""
        return cls((math.cos(phi), math.sin(phi), 0.0))


@dataclass(frozen=True)
class ScatterScene:
    position: tuple[float, float, float]
    orientation: Orientation
    cavity: CavityParams
    geometry: RodGeometry
    material: Material


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """Uniformly sampled detector signal.

    ``averaging_window`` records the length [s] of a sliding mean already
    applied to the samples (None for raw traces).
    """

    sample_rate: float
    t0: float
    samples: np.ndarray
    averaging_window: float | None = None

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def sinc(u):
    """Unnormalised sinc, sin(u)/u with sinc(0) = 1."""
    return np.sinc(np.asarray(u) / np.pi)


def intensity_factors(n, z, x, y, cav: CavityParams, geom: RodGeometry, mat: Material):
    """Vectorised core of :func:`scattering_intensity`.

    ``n`` has shape (..., 3); ``x, y, z`` broadcast against ``n[..., 0]``.
    """
    n = np.asarray(n, dtype=float)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    k = cav.k
    half_kl = k * geom.length / 2
    s_plus = sinc((nz + ny) * half_kl)
    s_minus = sinc((nz - ny) * half_kl)
    # internal field u = 2 e_x + (eps - 1)(n . e_x) n; |e_y x u|^2 = u_x^2 + u_z^2
    proj = (mat.epsilon_r - 1) * nx
    ux = 2 + proj * nx
    uz = proj * nz
    standing = s_plus**2 + 2 * np.cos(2 * k * np.asarray(z)) * s_plus * s_minus + s_minus**2
    envelope = np.exp(-2 * (np.asarray(x) ** 2 + np.asarray(y) ** 2) / cav.waist**2)
    return (ux**2 + uz**2) * standing * envelope


def scattering_intensity(scene: ScatterScene) -> float:
    """Relative intensity scattered towards the detector (unit prefactor)."""
    x, y, z = scene.position
    return float(
        intensity_factors(scene.orientation.n, z, x, y, scene.cavity, scene.geometry, scene.material)
    )


def scattering_prefactor(cav: CavityParams, geom: RodGeometry, mat: Material) -> float:
    """k^4 D^4 L^2 ((eps-1)/(eps+1))^2, in m^2. Only useful for comparing
    absolute scattering strengths of different rods."""
    eps = mat.epsilon_r
    return cav.k**4 * geom.diameter**4 * geom.length**2 * ((eps - 1) / (eps + 1)) ** 2


def normalize_signal(raw, cavity_intensity=1.0, sample_rate: float = 1.0, t0: float = 0.0) -> SignalTrace:
    """S_N = (I_S / I_C) / max(I_S / I_C).

    Negative ratios (detector offsets, noise) are clipped to zero so that
    the result lies in [0, 1].
    """
    raw = np.asarray(raw, dtype=float)
    ic = np.asarray(cavity_intensity, dtype=float)
    if ic.ndim and ic.shape != raw.shape:
        raise NormalizationError(f"cavity intensity shape {ic.shape} != signal shape {raw.shape}")
    if np.any(~(ic > 0)):
        raise NormalizationError("cavity intensity must be positive everywhere")
    ratio = raw / ic
    peak = np.max(ratio) if ratio.size else 0.0
    if not peak > 0:
        raise NormalizationError("signal has no positive sample to normalise by")
    samples = np.clip(ratio / peak, 0.0, 1.0)
    return SignalTrace(sample_rate, t0, samples)


def max_modulation_frequency(traj: Trajectory) -> float:
    """Largest of nu_rot = 2 f_rot and nu_trans = 2 v_z / lambda along the path."""
    nu_rot = 2 * np.max(np.abs(traj.phi_dot)) / (2 * math.pi)
    nu_trans = 2 * np.max(np.abs(traj.z_dot)) / traj.config.cavity.wavelength
    return float(max(nu_rot, nu_trans))


def synthesize_signal(traj: Trajectory, sample_rate: float, y_offset: float = 0.0) -> SignalTrace:
    """Normalised scattering trace along a simulated trajectory.

    States between integrator samples are filled in by cubic Hermite
    interpolation using the stored velocities. The particle sits at
    x = v_x t, y = ``y_offset`` with its axis at angle phi in the x-y plane.

    Raises
    ------
    AliasingError
        If ``sample_rate`` is below 20 times the fastest modulation.
    """
    needed = NYQUIST_GUARD * max_modulation_frequency(traj)
    if sample_rate < needed:
        raise AliasingError(
            f"sample rate {sample_rate:.4g} Hz below {NYQUIST_GUARD:g} x max modulation ({needed:.4g} Hz)"
        )
    cfg = traj.config
    n = int(math.floor((traj.t[-1] - traj.t[0]) * sample_rate + 1e-9)) + 1
    t = traj.t[0] + np.arange(n) / sample_rate
    z = CubicHermiteSpline(traj.t, traj.z, traj.z_dot)(t)
    phi = CubicHermiteSpline(traj.t, traj.phi, traj.phi_dot)(t)
    orient = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=-1)
    raw = intensity_factors(orient, z, cfg.v_x * t, y_offset, cfg.cavity, cfg.geometry, cfg.material)
    return normalize_signal(raw, 1.0, sample_rate, float(t[0]))
