"""Thompson-sampling beam selection and the sequential training loop."""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSampleError, InvalidArgumentError, NumericalDegeneracyError
from .posterior import Observation, sample_belief, update

# Safety stop for runs without a pilot budget; such runs report converged=False.
UNCONSTRAINED_SLOT_CAP = 200_000


class SchemeKind(enum.Enum):
    CODEBOOK = "codebook_ts"
    CONTINUOUS = "continuous_ts"
    HYBRID = "hybrid_ts"


class DetectorSignal(enum.Enum):
    """What magnitude the convergence rule watches, in unnormalised channel units.

    ``GAIN`` is the noise-free received amplitude ``|h^H w|`` of the probing
    beam; ``MEASURED`` is the noisy ``|y|``.
    """

    GAIN = "gain"
    MEASURED = "measured"


@dataclass
class ConvergenceDetector:
    """Fires once ``required_consecutive`` successive magnitude steps stay within tolerance.

    With ``relative=True`` the tolerance is ``epsilon * previous magnitude``,
    which makes the rule independent of the channel's absolute scale.
    """

    epsilon: float
    required_consecutive: int
    relative: bool = False
    counter: int = 0
    last_magnitude: float | None = None

    def __post_init__(self):
        if self.epsilon < 0 or self.required_consecutive < 1:
            raise InvalidArgumentError("need epsilon >= 0 and required_consecutive >= 1")

    def reset(self):
        self.counter = 0
        self.last_magnitude = None

    def check(self, magnitude):
        prev = self.last_magnitude
        if prev is not None:
            tol = self.epsilon
            if self.relative and not np.isinf(tol):
                tol = tol * prev
            if abs(magnitude - prev) <= tol:
                self.counter += 1
            else:
                self.counter = 0
        self.last_magnitude = magnitude
        if self.counter >= self.required_consecutive:
            self.counter = self.required_consecutive
            return True
        return False


def check_convergence(detector, y_magnitude):
    return detector.check(y_magnitude)


def select_codebook_beam(g_sample, F, codebook):
    if len(codebook) == 0:
        raise InvalidArgumentError("empty codebook")
    h_tilde = np.ascontiguousarray(F.beams @ g_sample)
    idx = kernels.codebook_argmax(codebook.words, h_tilde)
    return codebook.words[idx], idx


def select_continuous_beam(g_sample, F):
    norm = np.linalg.norm(g_sample)
    if not norm > 0:
        raise DegenerateSampleError("posterior sample is zero")
    return F.beams @ (g_sample / norm)


def data_beam(belief, F):
    h_hat = F.beams @ belief.mean
    norm = np.linalg.norm(h_hat)
    if not norm > 0:
        raise NumericalDegeneracyError("posterior mean is zero")
    return h_hat / norm


def boresight_beam(F, codebook=None):
    """Far-field beam at the grid angle nearest broadside."""
    n = F.n // 2
    if codebook is not None:
        hit = np.flatnonzero((codebook.angle_index == n) & (codebook.ring_index == 0))
        if hit.size:
            return codebook.words[hit[0]].copy()
    return F.beams[:, n].copy()


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    magnitude: float
    stage: int
    codeword: int | None  # None for a continuous-space beam


@dataclass
class TrainingOutcome:
    w_data: np.ndarray
    pilots_used: int
    converged: bool
    stage1_pilots: int = 0
    used_fallback: bool = False
    trace: list = field(default_factory=list)


def run_training(
    scheme,
    channel,
    F,
    codebook,
    prior,
    noise_var,
    budget,
    epsilon,
    consecutive,
    rng,
    unconstrained=False,
    detector_signal=DetectorSignal.GAIN,
    relative_tolerance=True,
    keep_trace=True,
):
    """Run one training interval and return the data beam.

    Each slot draws from the posterior, picks a beam, measures
    ``y = h^H w + n``, updates the belief and feeds the detector.  The hybrid
    scheme probes the codebook until the detector first fires, then resets the
    detector and continues in continuous space with the same belief.

    Magnitudes reach the detector in unnormalised channel units (divided by
    ``channel.norm_scale``), so an absolute ``epsilon`` refers to the physical
    path-loss scale.  ``budget`` is ignored when ``unconstrained`` is set; the
    run then stops at convergence or after ``UNCONSTRAINED_SLOT_CAP`` slots.
    """
    scheme = SchemeKind(scheme)
    detector_signal = DetectorSignal(detector_signal)
    if scheme in (SchemeKind.CODEBOOK, SchemeKind.HYBRID) and codebook is None:
        raise InvalidArgumentError(f"{scheme.value} needs a codebook")
    if not noise_var > 0:
        raise InvalidArgumentError("noise_var must be positive")
    limit = UNCONSTRAINED_SLOT_CAP if unconstrained else int(budget)

    h = channel.h
    inv_scale = 1.0 / channel.norm_scale
    noise_std = np.sqrt(noise_var / 2)
    belief = prior.copy()
    detector = ConvergenceDetector(epsilon, consecutive, relative_tolerance)
    stage = 2 if scheme is SchemeKind.CONTINUOUS else 1
    stage1_pilots = 0
    converged = False
    trace = []

    t = 0
    while t < limit:
        g_sample = sample_belief(belief, rng)
        if stage == 1:
            w, idx = select_codebook_beam(g_sample, F, codebook)
        else:
            w, idx = select_continuous_beam(g_sample, F), None
        gain = np.vdot(h, w)
        y = gain + noise_std * (rng.standard_normal() + 1j * rng.standard_normal())
        t += 1
        update(belief, Observation.from_measurement(F, w, y, noise_var), inplace=True)

        if detector_signal is DetectorSignal.GAIN:
            mag = abs(gain) * inv_scale
        else:
            mag = abs(y) * inv_scale
        if keep_trace:
            trace.append(SlotRecord(t, float(abs(y)), stage if scheme is SchemeKind.HYBRID else 1, idx))
        if detector.check(mag):
            if scheme is SchemeKind.HYBRID and stage == 1:
                stage, stage1_pilots = 2, t
                detector.reset()
                continue
            converged = True
            break

    if scheme is SchemeKind.HYBRID and stage == 1:
        stage1_pilots = t

    used_fallback = False
    try:
        w_data = data_beam(belief, F)
    except NumericalDegeneracyError:
        if t > 0:
            raise
        w_data, used_fallback = boresight_beam(F, codebook), True
    return TrainingOutcome(w_data, t, converged, stage1_pilots, used_fallback, trace)
