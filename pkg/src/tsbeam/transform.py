"""Unitary DFT basis and the near-field polar codebook.

Convention: the spatial channel is ``h = F^H g``.  The beam that isolates
DFT bin ``n`` is therefore ``F^H e_n``, the far-field steering vector towards
``theta = phi_n``.  Because ``F`` is symmetric this is also column ``N-1-n``
of ``F``, so the far-field codebook is the column set of ``F`` in mirrored
order.
"""

from dataclasses import dataclass

import numpy as np

from .channel import steering_vector
from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class DftMatrix:
    matrix: np.ndarray
    angle_grid: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def beams(self):
        """``F^H``; column ``n`` is the far-field beam for bin ``n``."""
        return self.matrix.conj().T


def angle_grid(n):
    k = np.arange(n)
    return (2 * k - n + 1) / n


def dft_matrix(n):
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    phi = angle_grid(n)
    delta = (2 * np.arange(n) - n + 1) / 2.0
    mat = np.exp(-1j * np.pi * np.outer(delta, phi)) / np.sqrt(n)
    return DftMatrix(mat, phi)


def _check_dim(F, x):
    x = np.asarray(x)
    if x.shape != (F.n,):
        raise InvalidArgumentError(f"expected vector of length {F.n}, got shape {x.shape}")
    return x


def spatial_to_dft(F, h):
    return F.matrix @ _check_dim(F, h)


def dft_to_spatial(F, g):
    return F.matrix.conj().T @ _check_dim(F, g)


def far_field_codebook(geometry):
    """Rows are the ``N`` far-field beams, row ``n`` steering to ``phi_n``."""
    F = dft_matrix(geometry.n_antennas)
    return np.ascontiguousarray(F.beams.T)


def ring_distance(geometry, theta, beta, s):
    n, d = geometry.n_antennas, geometry.spacing
    return n * n * d * d * (1 - theta * theta) / (2 * geometry.wavelength * beta * beta * s)


@dataclass(frozen=True, eq=False)
class PolarCodebook:
    words: np.ndarray  # (N*S, N), one codeword per row
    angle_index: np.ndarray
    ring_index: np.ndarray
    theta: np.ndarray
    distance: np.ndarray  # inf on the far-field ring
    beta: float

    def __len__(self):
        return self.words.shape[0]

    @property
    def n_rings(self):
        return int(self.ring_index.max()) + 1


def polar_codebook(geometry, beta=1.1, n_rings=5):
    """Angle-major, ring-minor codebook; ring 0 is the far-field DFT beam.

    Ring ``s >= 1`` at angle ``theta_n`` focuses at
    ``N^2 d^2 (1 - theta_n^2) / (2 lambda beta^2 s)``.
    """
    if n_rings < 1:
        raise InvalidArgumentError("n_rings must be >= 1")
    if not beta > 0:
        raise InvalidArgumentError("beta must be positive")
    n = geometry.n_antennas
    F = dft_matrix(n)
    ff = F.beams
    words = np.empty((n * n_rings, n), dtype=np.complex128)
    a_idx = np.repeat(np.arange(n), n_rings)
    s_idx = np.tile(np.arange(n_rings), n)
    theta = F.angle_grid[a_idx]
    dist = np.full(n * n_rings, np.inf)
    for row, (a, s) in enumerate(zip(a_idx, s_idx)):
        if s == 0:
            words[row] = ff[:, a]
        else:
            r = ring_distance(geometry, F.angle_grid[a], beta, s)
            dist[row] = r
            words[row] = steering_vector(geometry, F.angle_grid[a], r)
    return PolarCodebook(words, a_idx, s_idx, theta, dist, float(beta))
