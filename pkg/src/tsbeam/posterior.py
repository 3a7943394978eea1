"""Complex-Gaussian belief over the DFT-domain channel.

Measurements follow ``y = v^H g + n`` with ``n ~ CN(0, noise_var)``.  A
physical sample ``y_phys = h^H w + n`` is brought into this form by
conjugation, see :meth:`Observation.from_measurement`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericalDegeneracyError
from .transform import angle_grid


@dataclass(eq=False)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray
    t: int = 0
    # cached square root of cov, kept in step with it by the Potter downdate
    factor: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.mean.shape[0]

    def copy(self):
        factor = None if self.factor is None else self.factor.copy()
        return GaussianBelief(self.mean.copy(), self.cov.copy(), self.t, factor)


@dataclass(frozen=True)
class PriorConfig:
    length_scale: float = 1 / 128
    prior_scale: float = 1.0
    prior_mean: np.ndarray | None = None

    def __post_init__(self):
        if not self.length_scale > 0:
            raise InvalidArgumentError("length_scale must be positive")
        if not self.prior_scale > 0:
            raise InvalidArgumentError("prior_scale must be positive")


@dataclass(frozen=True, eq=False)
class Observation:
    v: np.ndarray
    y: complex
    noise_var: float

    def __post_init__(self):
        if not self.noise_var > 0:
            raise InvalidArgumentError("noise_var must be positive")
        norm = np.linalg.norm(self.v)
        if abs(norm - 1.0) > 1e-10:
            raise InvalidArgumentError(f"measurement vector must be unit-norm, got {norm}")

    @classmethod
    def from_measurement(cls, F, w, y_phys, noise_var):
        """Map a transmitted beam ``w`` and received ``h^H w + n`` into the model."""
        return cls(F.matrix @ w, complex(np.conj(y_phys)), noise_var)


def rbf_kernel(grid, length_scale):
    diff = (grid[:, None] - grid[None, :]) / length_scale
    return np.exp(-0.5 * diff * diff)


def rbf_prior(n, config=None):
    config = config or PriorConfig()
    cov = config.prior_scale * rbf_kernel(angle_grid(n), config.length_scale)
    cov = cov.astype(np.complex128)
    if config.prior_mean is None:
        mean = np.zeros(n, dtype=np.complex128)
    else:
        mean = np.array(config.prior_mean, dtype=np.complex128)
        if mean.shape != (n,):
            raise InvalidArgumentError("prior_mean has the wrong length")
    return GaussianBelief(mean, cov, 0)


def factorize(cov):
    """Lower factor ``C`` with ``C C^H = cov``; jittered once if needed."""
    n = cov.shape[0]
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.trace(cov).real / n
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("covariance is not positive definite") from exc


def _ensure_factor(belief):
    if belief.factor is None:
        belief.factor = np.ascontiguousarray(factorize(belief.cov))
    return belief.factor


def sample_belief(belief, rng):
    """One circularly-symmetric draw from ``CN(mean, cov)``."""
    n = belief.n
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return belief.mean + _ensure_factor(belief) @ z


def update(belief, obs, inplace=False):
    """Rank-one Bayesian update; returns the new belief with ``t`` advanced."""
    out = belief if inplace else belief.copy()
    _ensure_factor(out)
    v = np.ascontiguousarray(obs.v, dtype=np.complex128)
    alpha = kernels.rank1_update(
        out.mean, out.cov, out.factor, v, complex(obs.y), float(obs.noise_var)
    )
    if not alpha > 0:
        raise NumericalDegeneracyError(f"innovation variance {alpha} is not positive")
    out.t += 1
    return out


def batch_posterior(prior, observations):
    """Closed-form posterior from all observations at once."""
    if not observations:
        return prior.copy()
    n = prior.n
    d0 = prior.cov
    try:
        np.linalg.cholesky(d0)
    except np.linalg.LinAlgError:
        d0 = d0 + 1e-10 * np.eye(n)
    prec = np.linalg.inv(d0)
    info = prec @ prior.mean
    for obs in observations:
        prec = prec + np.outer(obs.v, obs.v.conj()) / obs.noise_var
        info = info + obs.v * obs.y / obs.noise_var
    try:
        cov = np.linalg.inv(prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("posterior precision is singular") from exc
    cov = 0.5 * (cov + cov.conj().T)
    return GaussianBelief(cov @ info, cov, prior.t + len(observations))
