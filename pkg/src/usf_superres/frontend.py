"""Simulated acquisition: modulo folding, quantization, clipping and noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive, check_signal
from .exceptions import ConfigError

__all__ = [
    "FoldedSignal",
    "ResidueModel",
    "AcquisitionConfig",
    "modulo_fold",
    "quantize_uniform",
    "clip",
    "residue_quantize",
    "modular_decompose",
    "residue_from_sequence",
    "acquire",
    "trial_rng",
]

MODES = ("modulo", "conventional")


@dataclass(frozen=True)
class FoldedSignal:
    """Sampled (and possibly folded/quantized) ADC output."""

    values: np.ndarray
    step: float
    lam: float
    bits: int = 0
    mode: str = "modulo"
    full_scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", check_signal(self.values, "values"))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        bound = self.lam if self.mode == "modulo" else (self.full_scale or self.lam)
        if np.any(np.abs(self.values) > bound * (1 + 1e-12)):
            raise ConfigError(f"{self.mode} samples exceed the range [-{bound:g}, {bound:g}]")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ResidueModel:
    """Fold-correction steps: jump ``amplitudes[m]`` at sample ``positions[m]``.

    ``positions`` index the first-difference sequence, i.e. a step of the
    residue ``g - M_lam(g)`` between samples ``n`` and ``n + 1`` sits at ``n``.
    """

    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float).ravel()
        pos = np.asarray(self.positions, dtype=int).ravel()
        if amp.shape != pos.shape:
            raise ConfigError("amplitudes and positions must have equal length")
        if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] < 0):
            raise ConfigError("positions must be strictly increasing and non-negative")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "positions", pos)

    @property
    def count(self):
        return len(self.positions)

    def to_sequence(self, length):
        out = np.zeros(length)
        out[self.positions] = self.amplitudes
        return out

    def __eq__(self, other):
        if not isinstance(other, ResidueModel):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.amplitudes, other.amplitudes
        )


@dataclass(frozen=True)
class AcquisitionConfig:
    lam: float = 1.0
    bits: int = 0
    mode: str = "modulo"
    full_scale: float | None = None
    noise_sigma: float = 0.0
    seed: int = 0
    trial: int = 0
    step: float = 1.0

    def __post_init__(self):
        check_positive(self.lam, "lam")
        check_int(self.bits, "bits", minimum=0, maximum=24)
        check_positive(self.noise_sigma, "noise_sigma", allow_zero=True)
        check_positive(self.step, "step")
        check_int(self.seed, "seed", minimum=0, maximum=2**64 - 1)
        check_int(self.trial, "trial", minimum=0)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.full_scale is not None:
            check_positive(self.full_scale, "full_scale")

    @property
    def effective_full_scale(self):
        if self.mode == "modulo":
            return self.lam
        return self.lam if self.full_scale is None else self.full_scale


def _fold_index(x, lam):
    """Integer ``k`` with ``x - 2 lam k`` in ``[-lam, lam)``."""
    k = np.floor(x / (2 * lam) + 0.5)
    r = x - 2 * lam * k
    # the division can round across a lattice boundary
    k = np.where(r >= lam, k + 1, k)
    k = np.where(r < -lam, k - 1, k)
    return k


def modulo_fold(x, lam):
    """Centered modulo ``2 lam (frac(x / 2 lam + 1/2) - 1/2)``, valued in ``[-lam, lam)``."""
    lam = check_positive(lam, "lam")
    x = np.asarray(x, dtype=float)
    out = x - 2 * lam * _fold_index(x, lam)
    return out if out.ndim else float(out)


def quantize_uniform(x, bits, full_scale):
    """Mid-rise uniform quantizer with ``2**bits`` levels spanning ``[-full_scale, full_scale]``."""
    bits = check_int(bits, "bits", minimum=1)
    fs = check_positive(full_scale, "full_scale")
    delta = 2 * fs / 2**bits
    x = np.asarray(x, dtype=float)
    out = delta * (np.floor(x / delta) + 0.5)
    out = np.clip(out, -fs + delta / 2, fs - delta / 2)
    return out if out.ndim else float(out)


def clip(x, full_scale):
    fs = check_positive(full_scale, "full_scale")
    out = np.clip(np.asarray(x, dtype=float), -fs, fs)
    return out if out.ndim else float(out)


def residue_quantize(x, lam):
    """Round onto the lattice ``2 lam Z``: ``2 lam floor((x + lam) / 2 lam)``."""
    lam = check_positive(lam, "lam")
    out = 2 * lam * np.floor((np.asarray(x, dtype=float) + lam) / (2 * lam))
    return out if out.ndim else float(out)


def modular_decompose(g, lam):
    """Split ``g`` into its folded part and the residue ``g - M_lam(g)`` on ``2 lam Z``.

    ``folded + residue == g`` holds exactly: for non-zero residues ``g`` and
    ``2 lam k`` are within a factor of two, so the subtraction is exact.
    """
    g = check_signal(g, "g")
    lam = check_positive(lam, "lam")
    residue = 2 * lam * _fold_index(g, lam)
    return g - residue, residue


def residue_from_sequence(seq, tol=0.0):
    """Collect the non-zero entries of a first-difference residue sequence."""
    seq = np.asarray(seq, dtype=float)
    pos = np.flatnonzero(np.abs(seq) > tol)
    return ResidueModel(amplitudes=seq[pos], positions=pos)


def trial_rng(seed, trial=0):
    """Independent generator for ``(seed, trial)``; streams never overlap across trials."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def acquire(g, cfg):
    """Simulate one ADC acquisition of the samples ``g``.

    Gaussian noise (``cfg.noise_sigma``) is added before the nonlinearity.
    Modulo mode folds with ``cfg.lam`` and quantizes over ``[-lam, lam]``;
    conventional mode clips at the full scale and quantizes over it.
    ``bits == 0`` skips quantization.
    """
    g = check_signal(g, "g")
    x = g
    if cfg.noise_sigma > 0:
        x = g + cfg.noise_sigma * trial_rng(cfg.seed, cfg.trial).standard_normal(g.size)
    fs = cfg.effective_full_scale
    if cfg.mode == "modulo":
        y = modulo_fold(x, cfg.lam)
    else:
        y = clip(x, fs)
    if cfg.bits > 0:
        y = quantize_uniform(y, cfg.bits, fs)
    return FoldedSignal(
        values=np.atleast_1d(y),
        step=cfg.step,
        lam=cfg.lam,
        bits=cfg.bits,
        mode=cfg.mode,
        full_scale=fs,
        seed=cfg.seed,
    )
