"""Filtered spike measurements, ToF scene generation and fidelity metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive, check_signal
from .exceptions import ConfigError, TruncationError
from .kernels import kernel_eval

__all__ = [
    "SPEED_OF_LIGHT",
    "SpikeTrain",
    "SampledSignal",
    "SceneSpec",
    "synthesize",
    "kernel_samples",
    "make_tof_scene",
    "fidelity",
]

SPEED_OF_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class SpikeTrain:
    """``K`` Diracs with real amplitudes at continuous, increasing delays (seconds)."""

    amplitudes: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float).ravel()
        dly = np.asarray(self.delays, dtype=float).ravel()
        if amp.shape != dly.shape:
            raise ConfigError("amplitudes and delays must have equal length")
        if not (np.all(np.isfinite(amp)) and np.all(np.isfinite(dly))):
            raise ConfigError("spike parameters must be finite")
        if dly.size and (dly[0] < 0 or np.any(np.diff(dly) <= 0)):
            raise ConfigError("delays must be non-negative and strictly increasing")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "delays", dly)

    @classmethod
    def from_unsorted(cls, amplitudes, delays):
        order = np.argsort(np.asarray(delays, dtype=float), kind="stable")
        return cls(np.asarray(amplitudes, dtype=float)[order], np.asarray(delays, dtype=float)[order])

    @property
    def count(self):
        return len(self.delays)

    @property
    def tv_norm(self):
        return float(np.sum(np.abs(self.amplitudes)))

    def scaled(self, alpha):
        return SpikeTrain(alpha * self.amplitudes, self.delays)

    def shifted(self, dt):
        return SpikeTrain(self.amplitudes, self.delays + dt)


@dataclass(frozen=True)
class SampledSignal:
    values: np.ndarray
    step: float

    def __post_init__(self):
        object.__setattr__(self, "values", check_signal(self.values, "values"))
        check_positive(self.step, "step")

    @property
    def count(self):
        return len(self.values)

    @property
    def window(self):
        return self.count * self.step


@dataclass(frozen=True)
class SceneSpec:
    """Reflecting surfaces at ``distances`` (meters) with ``reflectivities``."""

    distances: tuple
    reflectivities: tuple
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float).ravel()
        r = np.asarray(self.reflectivities, dtype=float).ravel()
        if d.shape != r.shape:
            raise ConfigError("distances and reflectivities must have equal length")
        if np.any(d <= 0) or np.any(np.diff(d) <= 0):
            raise ConfigError("distances must be positive and strictly increasing")
        object.__setattr__(self, "distances", tuple(d))
        object.__setattr__(self, "reflectivities", tuple(r))
        check_positive(self.c, "c")


def _placed(kernel, t):
    # left edge of the kernel support sits at t = 0
    return kernel_eval(kernel, t + kernel.support[0])


def kernel_samples(kernel, step, count, delay=0.0):
    """Samples ``psi(n T - delay)`` of the kernel with its support starting at 0."""
    n = np.arange(check_int(count, "count", minimum=1))
    return _placed(kernel, n * step - delay)


def synthesize(spikes, kernel, step, count, strict=True):
    """Samples ``g[n] = sum_k amp[k] psi(n T - delay[k])`` for ``n < count``.

    With ``strict`` the pulses must end inside the window
    (``max delay + kernel width < count * step``).
    """
    step = check_positive(step, "step")
    count = check_int(count, "count", minimum=1)
    if strict and spikes.count:
        if spikes.delays[-1] + kernel.width >= count * step:
            raise TruncationError(
                f"last pulse ends at {spikes.delays[-1] + kernel.width:g} s, "
                f"past the window {count * step:g} s"
            )
    t = np.arange(count) * step
    g = np.zeros(count)
    for amp, delay in zip(spikes.amplitudes, spikes.delays):
        g += amp * _placed(kernel, t - delay)
    return SampledSignal(g, step)


def make_tof_scene(spec):
    """Round-trip delays ``2 d / c`` with the reflectivities as amplitudes."""
    d = np.asarray(spec.distances)
    return SpikeTrain(np.asarray(spec.reflectivities), 2.0 * d / spec.c)


def fidelity(reference, estimate):
    """Mean-squared error and PSNR (``10 log10(max ref^2 / mse)``, ``inf`` when exact)."""
    ref = check_signal(reference, "reference")
    est = check_signal(estimate, "estimate")
    if ref.shape != est.shape:
        raise ConfigError(f"length mismatch: {ref.size} vs {est.size}")
    mse = float(np.mean((ref - est) ** 2))
    peak = float(np.max(ref**2))
    if mse == 0:
        psnr = math.inf
    elif peak == 0:
        psnr = -math.inf
    else:
        psnr = 10.0 * math.log10(peak / mse)
    return {"mse": mse, "psnr_db": psnr}
