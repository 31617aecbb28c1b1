"""Spectral estimation machinery for sum-of-sinusoids sequences.

All estimators work on samples ``s[l] = sum_k amp[k] * u_k**l`` with
``u_k = exp(-2j pi delay[k] / window)``, indexed by integer ``l``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from ._validation import check_complex, check_int, check_signal
from .exceptions import ConfigError, DegenerateError

__all__ = [
    "SpectralSamples",
    "ConditioningWarning",
    "finite_difference",
    "anti_difference",
    "circular_difference",
    "sos_from_samples",
    "spectral_ratio",
    "annihilating_filter",
    "delays_from_filter",
    "delays_from_poles",
    "amplitudes_ls",
    "matrix_pencil",
    "hermitian_toeplitz",
    "SPECTRUM_FLOOR",
    "ROOT_CLUSTER_TOL",
]

SPECTRUM_FLOOR = 1e-8
ROOT_CLUSTER_TOL = 1e-6


class ConditioningWarning(UserWarning):
    """An estimate was computed from an ill-conditioned system."""


@dataclass(frozen=True)
class SpectralSamples:
    """Complex samples ``values[i]`` at integer frequency ``indices[i]``."""

    values: np.ndarray
    indices: np.ndarray
    window: float

    def __post_init__(self):
        vals = check_complex(self.values, "values")
        idx = np.asarray(self.indices, dtype=int).ravel()
        if idx.shape != vals.shape:
            raise ConfigError("values and indices must have equal length")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ConfigError("indices must be strictly increasing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.values)

    @property
    def is_contiguous(self):
        return bool(np.all(np.diff(self.indices) == 1))

    def at(self, l):
        pos = np.searchsorted(self.indices, l)
        if np.any(pos >= len(self.indices)) or np.any(self.indices[np.minimum(pos, len(self) - 1)] != l):
            raise KeyError(f"index {l} not present")
        return self.values[pos]

    def symmetric(self):
        """Extend positive-index samples to ``-l`` by conjugate symmetry."""
        pos = self.indices > 0
        idx = np.concatenate([-self.indices[pos][::-1], self.indices[~pos & (self.indices == 0)], self.indices[pos]])
        vals = np.concatenate(
            [np.conj(self.values[pos][::-1]), self.values[~pos & (self.indices == 0)], self.values[pos]]
        )
        return SpectralSamples(vals, idx, self.window)


def finite_difference(x, order=1):
    """``order``-th forward difference; the result is ``order`` samples shorter."""
    order = check_int(order, "order", minimum=1)
    x = check_signal(x, "x")
    if x.size <= order:
        raise ConfigError(f"sequence of length {x.size} too short for order-{order} differences")
    return np.diff(x, n=order)


def anti_difference(dx, initial=0.0):
    """Running sum that inverts :func:`finite_difference` given the first sample."""
    dx = np.asarray(dx, dtype=float).ravel()
    return np.concatenate([[float(initial)], float(initial) + np.cumsum(dx)])


def circular_difference(x, order=1):
    """``order``-th forward difference with periodic wrap-around (same length)."""
    x = np.asarray(x, dtype=float)
    for _ in range(order):
        x = np.roll(x, -1) - x
    return x


def spectral_ratio(data_dft, kernel_dft, indices, window):
    """``data_dft[l] / kernel_dft[l]`` for ``l`` in ``indices``, guarded against dead bins."""
    kernel_dft = np.asarray(kernel_dft)
    indices = np.asarray(indices, dtype=int)
    floor = SPECTRUM_FLOOR * np.max(np.abs(kernel_dft))
    mag = np.abs(kernel_dft[indices])
    if np.any(mag <= floor):
        bad = int(indices[np.argmax(mag <= floor)])
        raise DegenerateError(f"kernel spectrum below floor at index {bad}")
    return SpectralSamples(np.asarray(data_dft)[indices] / kernel_dft[indices], indices, window)


def sos_from_samples(g, kernel_dft, max_index):
    """Sum-of-sinusoids samples ``DFT(g)[l] / DFT(psi)[l]`` for ``l = 1..max_index``."""
    max_index = check_int(max_index, "max_index", minimum=1)
    kernel_dft = check_complex(kernel_dft, "kernel_dft")
    if kernel_dft.size != g.count:
        raise ConfigError("kernel DFT length must match the signal length")
    if max_index >= g.count:
        raise ConfigError("max_index must be below the number of samples")
    return spectral_ratio(np.fft.fft(g.values), kernel_dft, np.arange(1, max_index + 1), g.window)


def _contiguous(s, needed, what):
    if not s.is_contiguous:
        raise ConfigError(f"{what} needs contiguous frequency indices")
    if len(s) < needed:
        raise ConfigError(f"{what} needs at least {needed} spectral samples, got {len(s)}")


def annihilating_filter(s, K):
    """Filter ``f`` (``f[0] = 1``) annihilating a ``K``-term sum of sinusoids.

    Solved as the minimal right-singular vector of the Toeplitz system
    ``sum_i f[i] s[m - i] = 0``.
    """
    K = check_int(K, "K", minimum=1)
    _contiguous(s, 2 * K, "annihilating filter")
    x = s.values
    # rows m = K..n-1 : [x[m], x[m-1], ..., x[m-K]]
    T = toeplitz(x[K:], x[K::-1])
    _, sv, vh = np.linalg.svd(T)
    f = np.conj(vh[-1])
    if sv.size > K and sv[K - 1] <= 1e-10 * sv[0]:
        raise DegenerateError("annihilating system has a null space wider than one (coincident spikes?)")
    if abs(f[0]) < 1e-12 * np.linalg.norm(f):
        raise DegenerateError("annihilating filter has vanishing leading coefficient")
    return f / f[0]


def delays_from_poles(poles, window, cluster_tol=ROOT_CLUSTER_TOL):
    """Map poles ``u_k`` to delays ``-window * arg(u_k) / 2 pi`` in ``[0, window)``, sorted."""
    poles = np.asarray(poles, dtype=complex)
    delays = np.mod(-window * np.angle(poles) / (2 * np.pi), window)
    # mod can return exactly window for tiny negative arguments
    delays = np.where(delays >= window, 0.0, delays)
    order = np.argsort(delays, kind="stable")
    delays = delays[order]
    if delays.size > 1:
        gaps = np.diff(np.concatenate([delays, [delays[0] + window]])) * 2 * np.pi / window
        if np.min(gaps) < cluster_tol:
            raise DegenerateError("coincident roots: two delays closer than the clustering tolerance")
    return delays, poles[order]


def delays_from_filter(f, window):
    """Delays encoded by the roots of an annihilating filter (companion eigenvalues)."""
    f = check_complex(f, "f")
    if f.size < 2 or f[0] == 0:
        raise ConfigError("filter needs at least two coefficients and a non-zero leading one")
    delays, _ = delays_from_poles(np.roots(f), window)
    return delays


def _vandermonde(indices, delays, window):
    return np.exp(-2j * np.pi * np.outer(indices, delays) / window)


def amplitudes_ls(s, delays, return_imag=False):
    """Least-squares real amplitudes for known delays.

    The complex solution's imaginary part is dropped; with ``return_imag``
    the relative size of the discarded part is returned as well.
    """
    delays = np.asarray(delays, dtype=float).ravel()
    if delays.size == 0:
        return (np.zeros(0), 0.0) if return_imag else np.zeros(0)
    if len(s) < delays.size:
        raise ConfigError("fewer spectral samples than unknown amplitudes")
    V = _vandermonde(s.indices, delays, s.window)
    sol, *_ = np.linalg.lstsq(V, s.values, rcond=None)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e10:
        warnings.warn(f"Vandermonde condition number {cond:.3g}: near-coincident delays", ConditioningWarning)
    amps = sol.real.copy()
    if return_imag:
        scale = np.linalg.norm(sol)
        return amps, float(np.linalg.norm(sol.imag) / scale) if scale else 0.0
    return amps


def matrix_pencil(s, K):
    """``K`` pole estimates from the SVD-truncated matrix pencil of a Hankel matrix.

    Pencil parameter ``P = ceil(n / 2)`` for ``n`` contiguous samples; poles are
    not projected onto the unit circle.
    """
    K = check_int(K, "K", minimum=1)
    _contiguous(s, 2 * K + 1, "matrix pencil")
    x = s.values
    n = x.size
    P = int(np.ceil(n / 2))
    # Y[i, j] = x[i + j], shape (n - P) x (P + 1)
    Y = np.lib.stride_tricks.sliding_window_view(x, P + 1)
    _, sv, vh = np.linalg.svd(Y, full_matrices=False)
    if sv.size < K or sv[K - 1] <= 1e-13 * sv[0]:
        raise DegenerateError(f"signal subspace has rank below {K}")
    # rows of vh span the row space, i.e. the vectors (u_k ** j)_j
    V = vh[:K].T
    poles = np.linalg.eigvals(np.linalg.pinv(V[:-1]) @ V[1:])
    return poles


def hermitian_toeplitz(s, size):
    """``size x size`` matrix ``T[i, j] = s[i - j]`` from samples at ``-(size-1)..size-1``."""
    size = check_int(size, "size", minimum=1)
    col = np.array([s.at(i) for i in range(size)])
    row = np.array([s.at(-i) for i in range(size)])
    return toeplitz(col, row)
