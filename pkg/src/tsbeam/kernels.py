"""Hot inner-loop kernels: rank-one posterior downdate and codebook argmax.

Each kernel exists as a vectorised numpy routine and as an explicit loop
compiled by numba.  ``rank1_update`` and ``codebook_argmax`` point to one or
the other depending on :mod:`tsbeam._accel`.
"""

import numpy as np

from ._accel import USE_NUMBA, numba


def rank1_update_np(mean, cov, factor, v, y, noise_var):
    """In-place conjugate-Gaussian update for ``y = v^H g + n``.

    ``factor`` is a square root of ``cov`` (``cov = factor @ factor^H``) and is
    downdated with the Potter form so sampling never refactorises.  Returns
    the innovation variance alpha.
    """
    dv = cov @ v
    alpha = np.vdot(v, dv).real + noise_var
    if not alpha > 0.0:
        return alpha
    gain = dv / alpha
    innov = y - np.vdot(v, mean)
    mean += gain * innov
    cov -= np.outer(gain, dv.conj())
    cov += cov.conj().T
    cov *= 0.5
    a = factor.conj().T @ v
    gamma = 1.0 / (alpha + np.sqrt(noise_var * alpha))
    factor -= gamma * np.outer(dv, a.conj())
    return alpha


def _rank1_update_loop(mean, cov, factor, v, y, noise_var):
    n = mean.shape[0]
    dv = np.zeros(n, dtype=np.complex128)
    a = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        acc = 0j
        for j in range(n):
            acc += cov[i, j] * v[j]
        dv[i] = acc
    quad = 0.0
    pred = 0j
    for i in range(n):
        quad += (v[i].conjugate() * dv[i]).real
        pred += v[i].conjugate() * mean[i]
    alpha = quad + noise_var
    if not alpha > 0.0:
        return alpha
    innov = y - pred
    for i in range(n):
        mean[i] += dv[i] / alpha * innov
    for i in range(n):
        ki = dv[i] / alpha
        cov[i, i] = (cov[i, i] - ki * dv[i].conjugate()).real
        for j in range(i + 1, n):
            kj = dv[j] / alpha
            upper = cov[i, j] - ki * dv[j].conjugate()
            lower = cov[j, i] - kj * dv[i].conjugate()
            avg = 0.5 * (upper + lower.conjugate())
            cov[i, j] = avg
            cov[j, i] = avg.conjugate()
    for i in range(n):
        for j in range(n):
            a[j] += factor[i, j].conjugate() * v[i]
    gamma = 1.0 / (alpha + np.sqrt(noise_var * alpha))
    for i in range(n):
        gi = gamma * dv[i]
        for j in range(n):
            factor[i, j] -= gi * a[j].conjugate()
    return alpha


def codebook_argmax_np(words, h):
    """Index of the row ``w`` of ``words`` maximising ``|h^H w|``.

    Ties resolve to the lowest index.
    """
    scores = np.abs(words @ h.conj())
    return int(np.argmax(scores))


def _codebook_argmax_loop(words, h):
    n_words, n = words.shape
    hc = h.conjugate()
    best = -1.0
    best_k = 0
    for k in range(n_words):
        re = 0.0
        im = 0.0
        for i in range(n):
            p = words[k, i] * hc[i]
            re += p.real
            im += p.imag
        score = re * re + im * im
        if score > best:
            best = score
            best_k = k
    return best_k


if numba is not None:
    rank1_update_nb = numba.njit(cache=True, nogil=True)(_rank1_update_loop)
    codebook_argmax_nb = numba.njit(cache=True, nogil=True, fastmath=True)(_codebook_argmax_loop)
else:  # pragma: no cover
    rank1_update_nb = None
    codebook_argmax_nb = None

if USE_NUMBA:
    rank1_update = rank1_update_nb
    codebook_argmax = codebook_argmax_nb
else:
    rank1_update = rank1_update_np
    codebook_argmax = codebook_argmax_np
