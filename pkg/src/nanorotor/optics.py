"""Particle properties, polarizabilities and the standing-wave cavity field.

SI units throughout. Polarizability volumes in cubic angstrom only show up
through :func:`to_angstrom3`, for reporting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0 as EPS0

MIN_ASPECT_RATIO = 4.0

SILICON_EPSILON_R = 12.1  # n ~ 3.48 at 1560 nm
SILICON_DENSITY = 2329.0  # kg/m^3


class ValidityError(ValueError):
    """Raised when a model is used outside its range of validity."""


@dataclass(frozen=True)
class RodGeometry:
    length: float
    diameter: float

    def __post_init__(self):
        if not (self.length > 0 and self.diameter > 0):
            raise ValueError(f"rod dimensions must be positive, got {self}")

    @property
    def aspect_ratio(self) -> float:
        return self.length / self.diameter

    @property
    def volume(self) -> float:
        # plain cylinder, etched tip ignored
        return math.pi * (self.diameter / 2) ** 2 * self.length


@dataclass(frozen=True)
class Material:
    epsilon_r: float = SILICON_EPSILON_R
    density: float = SILICON_DENSITY

    def __post_init__(self):
        # epsilon_r == 1 is allowed: a rod without dielectric contrast
        if not self.epsilon_r >= 1:
            raise ValueError(f"epsilon_r must be >= 1, got {self.epsilon_r}")
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density}")


@dataclass(frozen=True)
class BodyProperties:
    mass: float
    inertia: float

    @classmethod
    def of(cls, geom: RodGeometry, mat: Material) -> "BodyProperties":
        """Mass of the cylinder and its moment of inertia about a transverse
        axis through the centre (thin-rod limit, M L^2 / 12)."""
        mass = mat.density * geom.volume
        return cls(mass=mass, inertia=mass * geom.length**2 / 12)


@dataclass(frozen=True)
class Polarizability:
    alpha_par: float
    alpha_perp: float

    @property
    def anisotropy(self) -> float:
        return self.alpha_par - self.alpha_perp

    @classmethod
    def isotropic(cls, alpha: float) -> "Polarizability":
        return cls(alpha, alpha)


@dataclass(frozen=True)
class CavityParams:
    wavelength: float = 1560e-9
    waist: float = 65e-6
    field_amplitude: float = 0.0

    def __post_init__(self):
        if not (self.wavelength > 0 and self.waist > 0):
            raise ValueError(f"wavelength and waist must be positive, got {self}")
        if not self.field_amplitude >= 0:
            raise ValueError(f"field amplitude must be >= 0, got {self.field_amplitude}")

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength


def to_angstrom3(alpha: float) -> float:
    """Polarizability volume alpha / (4 pi eps0) in cubic angstrom."""
    return alpha / (4 * math.pi * EPS0) / 1e-30


def needle_polarizability(geom: RodGeometry, mat: Material) -> Polarizability:
    """Polarizability of a thin dielectric needle.

    Limit of the ellipsoid result with depolarisation factors 0 along the
    axis and 1/2 across it, so that ``alpha_par / alpha_perp`` equals
    ``(eps_r + 1) / 2``.

    Raises
    ------
    ValidityError
        If the aspect ratio is below 4, where the needle limit breaks down.
    """
    if geom.aspect_ratio < MIN_ASPECT_RATIO:
        raise ValidityError(
            f"aspect ratio {geom.aspect_ratio:.3g} < {MIN_ASPECT_RATIO}: needle limit invalid"
        )
    eps = mat.epsilon_r
    v = geom.volume
    return Polarizability(
        alpha_par=EPS0 * v * (eps - 1),
        alpha_perp=EPS0 * v * 2 * (eps - 1) / (eps + 1),
    )


def sphere_polarizability(volume: float, mat: Material) -> float:
    """Clausius-Mossotti polarizability of a sub-wavelength sphere."""
    if not volume > 0:
        raise ValueError(f"volume must be positive, got {volume}")
    eps = mat.epsilon_r
    return 3 * EPS0 * volume * (eps - 1) / (eps + 2)


def orientation_averaged_polarizability(pol: Polarizability, mode: str = "isotropic3d") -> float:
    """Average over orientations.

    ``isotropic3d`` averages over all rotation axes (one parallel, two
    perpendicular components); ``planar`` is the average seen by a rod
    spinning in a plane containing the field direction.
    """
    if mode == "isotropic3d":
        return pol.alpha_par / 3 + 2 * pol.alpha_perp / 3
    if mode == "planar":
        return (pol.alpha_par + pol.alpha_perp) / 2
    raise ValueError(f"unknown averaging mode {mode!r}")


def peak_intensity(power: float, waist: float) -> float:
    """Peak intensity 2P / (pi w0^2) of a Gaussian mode carrying ``power``."""
    return 2 * power / (math.pi * waist**2)


def cavity_field_amplitude(intensity: float) -> float:
    """Standing-wave field amplitude sqrt(4 I_C / (c eps0))."""
    if intensity < 0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    return math.sqrt(4 * intensity / (SPEED_OF_LIGHT * EPS0))


def gaussian_envelope(t, v_x: float, waist: float):
    """Intensity envelope exp(-2 (v_x t)^2 / w0^2) for a vertical transit
    crossing the beam centre at t = 0."""
    return np.exp(-2 * (v_x * np.asarray(t)) ** 2 / waist**2)


def effective_polarizability(phi, pol: Polarizability):
    """alpha_perp + (alpha_par - alpha_perp) cos^2(phi): the response along
    the field polarisation for a rod at angle ``phi`` to it."""
    return pol.alpha_perp + pol.anisotropy * np.cos(phi) ** 2


def axial_acceleration(z, phi, envelope, cav: CavityParams, pol: Polarizability, body: BodyProperties):
    """Acceleration along the cavity axis; points towards the nearest antinode."""
    k = cav.k
    return (
        -(cav.field_amplitude**2 * k / (4 * body.mass))
        * effective_polarizability(phi, pol)
        * np.sin(2 * k * np.asarray(z))
        * envelope
    )


def angular_acceleration(z, phi, envelope, cav: CavityParams, pol: Polarizability, body: BodyProperties):
    """In-plane angular acceleration; the torque pulls the rod axis onto the
    polarisation direction (phi = 0 mod pi)."""
    return (
        -(cav.field_amplitude**2 / (4 * body.inertia))
        * pol.anisotropy
        * np.sin(2 * np.asarray(phi))
        * np.cos(cav.k * np.asarray(z)) ** 2
        * envelope
    )


def optical_potential(z, phi, envelope, cav: CavityParams, pol: Polarizability):
    """Dipole potential energy whose gradients give the two accelerations."""
    return (
        -(cav.field_amplitude**2 / 4)
        * effective_polarizability(phi, pol)
        * np.cos(cav.k * np.asarray(z)) ** 2
        * envelope
    )


def trap_frequency(cav: CavityParams, alpha: float, mass: float) -> float:
    """Small-oscillation frequency [Hz] about an antinode for a fixed
    effective polarizability ``alpha``."""
    return cav.field_amplitude * cav.k * math.sqrt(alpha / (2 * mass)) / (2 * math.pi)


def libration_frequency(cav: CavityParams, pol: Polarizability, body: BodyProperties) -> float:
    """Small-angle orientational oscillation frequency [Hz] at an antinode."""
    return cav.field_amplitude * math.sqrt(max(pol.anisotropy, 0.0) / (2 * body.inertia)) / (2 * math.pi)
