"""Exact spike recovery from ideally folded, unquantized samples.

The pipeline unfolds high-order differences with a single modulo
(``M(D^h y) = D^h g`` once the sampling step is small enough), then
reads the spikes off the sum-of-sinusoids spectrum with Prony's method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive
from .exceptions import ConfigError
from .forward import SpikeTrain, kernel_samples
from .frontend import FoldedSignal, modulo_fold
from .kernels import favard_constant
from .spectral import (
    SPECTRUM_FLOOR,
    amplitudes_ls,
    annihilating_filter,
    circular_difference,
    delays_from_filter,
    finite_difference,
    spectral_ratio,
)

__all__ = [
    "ExactParams",
    "max_sampling_step",
    "difference_bound",
    "unfold_by_differences",
    "default_bin_count",
    "recover_exact",
]


@dataclass(frozen=True)
class ExactParams:
    """Quantities entering the sampling-step bound.

    ``h`` is the difference order used for unfolding, ``1 <= h <= L``;
    ``zeta >= 1`` is the oversampling factor on the ``2K`` spectral samples.
    """

    K: int
    L: int
    h: int
    gamma: float
    lam: float
    tv_norm: float
    kernel_sup: float
    window: float
    zeta: float = 1.0

    def __post_init__(self):
        check_int(self.K, "K", minimum=1)
        check_int(self.L, "L", minimum=1)
        check_int(self.h, "h", minimum=1, maximum=self.L)
        for name in ("gamma", "lam", "tv_norm", "kernel_sup", "window"):
            check_positive(getattr(self, name), name)
        if self.zeta < 1:
            raise ConfigError(f"zeta must be >= 1, got {self.zeta}")


def max_sampling_step(p):
    """Largest sampling step for which exact recovery is guaranteed.

    ``min(tau / (L + 2 zeta K), (gamma / pi) * (K_L lam / (K_{L-h} TV ||psi||))^(1/h))``
    """
    count_term = p.window / (p.L + 2 * p.zeta * p.K)
    ratio = favard_constant(p.L) * p.lam / (favard_constant(p.L - p.h) * p.tv_norm * p.kernel_sup)
    return min(count_term, p.gamma / np.pi * ratio ** (1.0 / p.h))


def difference_bound(p, step):
    """Upper bound ``(K_{L-h}/K_L) (pi T / gamma)^h TV ||psi||`` on ``max |D^h g|``."""
    return (
        favard_constant(p.L - p.h)
        / favard_constant(p.L)
        * (np.pi * step / p.gamma) ** p.h
        * p.tv_norm
        * p.kernel_sup
    )


def unfold_by_differences(y, order, lam):
    """``M_lam`` applied to the ``order``-th difference of the folded samples.

    Equals the same difference of the unfolded signal only when that
    difference stays inside ``[-lam, lam)``; a violation is not detectable
    here, so callers must pick the sampling step first.
    """
    values = y.values if isinstance(y, FoldedSignal) else y
    return modulo_fold(finite_difference(values, order), lam)


def _usable_bins(kernel_dft, limit):
    floor = SPECTRUM_FLOOR * np.max(np.abs(kernel_dft))
    ok = np.abs(kernel_dft[1 : limit + 1]) > floor
    return int(np.argmin(ok)) if not np.all(ok) else int(ok.size)


def default_bin_count(K, kernel_dft):
    """``min(2K + 8, contiguous bins above the spectrum floor, N/2 - 1)``."""
    limit = len(kernel_dft) // 2 - 1
    return min(2 * K + 8, _usable_bins(kernel_dft, limit))


def recover_exact(y, kernel, p, n_bins=None):
    """Spike train from folded samples by difference unfolding + Prony.

    The ``h``-th differences are unfolded, zero-padded to a circular
    difference (the signal must vanish on its first and last ``h``
    samples) and divided in the DFT domain by the circular ``h``-th
    difference of the kernel samples. The DC bin is not used.
    """
    if not isinstance(y, FoldedSignal):
        raise ConfigError("recover_exact expects a FoldedSignal")
    N = len(y)
    T = y.step
    tau = N * T
    d = unfold_by_differences(y, p.h, p.lam)
    data_dft = np.fft.fft(np.concatenate([d, np.zeros(p.h)]))
    kernel_dft = np.fft.fft(circular_difference(kernel_samples(kernel, T, N), p.h))
    if n_bins is None:
        n_bins = default_bin_count(p.K, kernel_dft)
    if n_bins < 2 * p.K:
        raise ConfigError(f"only {n_bins} usable spectral bins, need at least {2 * p.K}")
    s = spectral_ratio(data_dft, kernel_dft, np.arange(1, n_bins + 1), tau)
    f = annihilating_filter(s, p.K)
    delays = delays_from_filter(f, tau)
    amps = amplitudes_ls(s, delays)
    return SpikeTrain(amps, delays)
