"""Near-field multipath channel model for a uniform linear array.

A target at ``(theta, r)`` sits at Cartesian ``(r * sqrt(1 - theta**2), r * theta)``
with the array along the y axis, so ``element_distance`` is the exact Euclidean
distance to each element.  ``theta`` is always the sine of the physical angle.
"""

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    n_antennas: int
    wavelength: float
    spacing: float

    def __post_init__(self):
        if self.n_antennas < 1:
            raise InvalidArgumentError("n_antennas must be positive")
        if not (self.wavelength > 0 and self.spacing > 0):
            raise InvalidArgumentError("wavelength and spacing must be positive")

    @classmethod
    def half_wavelength(cls, n_antennas, wavelength):
        return cls(int(n_antennas), float(wavelength), float(wavelength) / 2)

    @classmethod
    def from_carrier(cls, n_antennas, carrier_freq):
        return cls.half_wavelength(n_antennas, SPEED_OF_LIGHT / carrier_freq)

    @property
    def element_offsets(self):
        n = np.arange(self.n_antennas)
        return (2 * n - self.n_antennas + 1) / 2.0

    @property
    def aperture(self):
        return (self.n_antennas - 1) * self.spacing

    @property
    def rayleigh_distance(self):
        return 2 * self.aperture**2 / self.wavelength


class PathKind(enum.Enum):
    LOS = "LoS"
    NLOS = "NLoS"


@dataclass(frozen=True)
class PathComponent:
    kind: PathKind
    theta: float
    r1: float
    r2: float | None
    gain: complex


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray
    paths: tuple
    norm_scale: float
    raw_norm_sq: float

    @property
    def n_antennas(self):
        return self.h.shape[0]

    @property
    def raw_h(self):
        return self.h / self.norm_scale

    def digest(self):
        """Short content hash of ``h``; used to prove channels are paired."""
        data = np.ascontiguousarray(self.h, dtype=np.complex128).tobytes()
        return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: ArrayGeometry
    n_paths: int = 4
    distance_range: tuple = (7.0, 100.0)
    angle_range: tuple = (-np.pi / 3, np.pi / 3)
    physical_cosine: bool = False

    def __post_init__(self):
        r_min, r_max = self.distance_range
        a_min, a_max = self.angle_range
        if self.n_paths < 1:
            raise InvalidArgumentError("n_paths must be >= 1")
        if not 0 < r_min < r_max:
            raise InvalidArgumentError(f"bad distance_range {self.distance_range}")
        if not a_min < a_max:
            raise InvalidArgumentError(f"bad angle_range {self.angle_range}")


def _check_target(theta, r):
    if not r > 0:
        raise InvalidArgumentError(f"distance must be positive, got {r}")
    if abs(theta) > 1:
        raise InvalidArgumentError(f"|theta| must be <= 1, got {theta}")


def element_distance(geometry, n, theta, r):
    _check_target(theta, r)
    if not 0 <= n < geometry.n_antennas:
        raise InvalidArgumentError(f"antenna index {n} out of range")
    off = geometry.element_offsets[n] * geometry.spacing
    return float(np.sqrt(r * r + off * off - 2 * r * off * theta))


def element_distances(geometry, theta, r):
    """All ``N`` element-to-target distances at once."""
    _check_target(theta, r)
    off = geometry.element_offsets * geometry.spacing
    return np.sqrt(r * r + off * off - 2 * r * off * theta)


def steering_vector(geometry, theta, r):
    dist = element_distances(geometry, theta, r)
    phase = -2j * np.pi * (dist - r) / geometry.wavelength
    return np.exp(phase) / np.sqrt(geometry.n_antennas)


def los_gain(geometry, r_u):
    if not r_u > 0:
        raise InvalidArgumentError("r_u must be positive")
    g_u = geometry.wavelength / (4 * np.pi * r_u)
    return g_u * np.exp(-2j * np.pi * r_u / geometry.wavelength)


def los_channel(geometry, theta_u, r_u):
    gain = los_gain(geometry, r_u)
    return np.sqrt(geometry.n_antennas) * gain * steering_vector(geometry, theta_u, r_u)


def scatterer_user_distance(theta_u, r_u, theta_l, r_l1, physical=False):
    """Law of cosines between scatterer and user.

    By default the cosine is taken of the difference of angle sines, exactly
    as the model is usually stated; ``physical=True`` uses the true angles.
    """
    if physical:
        delta = np.arcsin(theta_u) - np.arcsin(theta_l)
    else:
        delta = theta_u - theta_l
    sq = r_l1 * r_l1 + r_u * r_u - 2 * r_u * r_l1 * np.cos(delta)
    return float(np.sqrt(max(sq, 0.0)))


def nlos_terms(geometry, user, scatterers, reflection_coeffs, physical=False):
    """Per-scatterer path records ``(theta_l, r_l1, r_l2, gain)``."""
    if len(scatterers) != len(reflection_coeffs):
        raise InvalidArgumentError("one reflection coefficient per scatterer required")
    theta_u, r_u = user
    _check_target(theta_u, r_u)
    lam = geometry.wavelength
    out = []
    for (theta_l, r_l1), p_l in zip(scatterers, reflection_coeffs):
        _check_target(theta_l, r_l1)
        r_l2 = scatterer_user_distance(theta_u, r_u, theta_l, r_l1, physical)
        if not r_l2 > 0:
            raise InvalidArgumentError("scatterer coincides with the user")
        g_l = lam * p_l / (4 * np.pi * r_l1 * r_l2)
        gain = g_l * np.exp(-2j * np.pi * (r_l1 + r_l2) / lam)
        out.append((theta_l, r_l1, r_l2, complex(gain)))
    return out


def nlos_channel(geometry, user, scatterers, reflection_coeffs, physical=False):
    h = np.zeros(geometry.n_antennas, dtype=np.complex128)
    root_n = np.sqrt(geometry.n_antennas)
    for theta_l, r_l1, _, gain in nlos_terms(
        geometry, user, scatterers, reflection_coeffs, physical
    ):
        h += root_n * gain * steering_vector(geometry, theta_l, r_l1)
    return h


def _draw_position(config, rng):
    phi = rng.uniform(*config.angle_range)
    r = rng.uniform(*config.distance_range)
    return float(np.sin(phi)), float(r)


def sample_scenario(config, rng):
    """Draw user, scatterers and reflection coefficients; normalise ``||h||^2 = N``."""
    geom = config.geometry
    theta_u, r_u = _draw_position(config, rng)
    scatterers, coeffs = [], []
    for _ in range(config.n_paths - 1):
        while True:
            theta_l, r_l1 = _draw_position(config, rng)
            r_l2 = scatterer_user_distance(theta_u, r_u, theta_l, r_l1, config.physical_cosine)
            if r_l2 >= 1e-6:
                break
        p = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
        scatterers.append((theta_l, r_l1))
        coeffs.append(p)

    h = los_channel(geom, theta_u, r_u)
    paths = [PathComponent(PathKind.LOS, theta_u, r_u, None, complex(los_gain(geom, r_u)))]
    if scatterers:
        h = h + nlos_channel(geom, (theta_u, r_u), scatterers, coeffs, config.physical_cosine)
        for theta_l, r_l1, r_l2, gain in nlos_terms(
            geom, (theta_u, r_u), scatterers, coeffs, config.physical_cosine
        ):
            paths.append(PathComponent(PathKind.NLOS, theta_l, r_l1, r_l2, gain))

    raw_norm_sq = float(np.vdot(h, h).real)
    scale = float(np.sqrt(geom.n_antennas / raw_norm_sq))
    return ChannelRealization(h * scale, tuple(paths), scale, raw_norm_sq)
