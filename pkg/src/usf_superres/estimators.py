"""Scikit-learn style wrappers around the acquisition and recovery functions.

The "samples" here are a single 1-D signal rather than a feature matrix, so
``fit`` takes one sequence (or a :class:`FoldedSignal`) and ``predict``
re-synthesizes the filtered waveform from the fitted spikes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_int, check_is_fitted, check_positive, check_signal
from .exact import ExactParams, max_sampling_step, recover_exact
from .exceptions import ConfigError
from .forward import synthesize
from .frontend import AcquisitionConfig, FoldedSignal, acquire
from .itersis import ItersisConfig, itersis_recover
from .kernels import KernelModel, kernel_sup_norm

__all__ = ["ModuloADC", "ExactRecovery", "SRIterSiS"]


def _as_kernel(kernel):
    if isinstance(kernel, KernelModel):
        return kernel
    if isinstance(kernel, dict):
        from .io import kernel_from_dict

        return kernel_from_dict(kernel)
    raise ConfigError("kernel must be a KernelModel or a {coeffs, gamma, order} dict")


def _as_folded(y, lam, bits, step):
    if isinstance(y, FoldedSignal):
        return y
    return FoldedSignal(check_signal(y, "y"), step=step, lam=lam, bits=bits)


class ModuloADC(TransformerMixin, BaseEstimator):
    """Simulated ADC: fold (or clip), then quantize.

    Parameters
    ----------
    lam : float
        Folding threshold; samples land in ``[-lam, lam)``.
    bits : int
        Quantizer bits, ``0`` for none.
    mode : {"modulo", "conventional"}
    full_scale : float or None
        Clipping level in conventional mode (defaults to ``lam``).
    noise_sigma : float
        Standard deviation of additive Gaussian noise before the nonlinearity.
    seed : int
    step : float
        Sampling step recorded on the output.
    """

    def __init__(self, lam=1.0, bits=0, mode="modulo", full_scale=None, noise_sigma=0.0, seed=0, step=1.0):
        self.lam = lam
        self.bits = bits
        self.mode = mode
        self.full_scale = full_scale
        self.noise_sigma = noise_sigma
        self.seed = seed
        self.step = step

    def _config(self):
        return AcquisitionConfig(
            lam=self.lam,
            bits=self.bits,
            mode=self.mode,
            full_scale=self.full_scale,
            noise_sigma=self.noise_sigma,
            seed=self.seed,
            step=self.step,
        )

    def fit(self, X, y=None):
        self.config_ = self._config()
        return self

    def acquire(self, g):
        """Return the full :class:`FoldedSignal` for samples ``g``."""
        check_is_fitted(self, "config_")
        return acquire(g, self.config_)

    def transform(self, X):
        return self.acquire(X).values


class _SpikeRecovery(BaseEstimator):
    """Shared fitted-state handling for the spike estimators."""

    def _store(self, spikes, y):
        self.spikes_ = spikes
        self.amplitudes_ = spikes.amplitudes
        self.delays_ = spikes.delays
        self.n_samples_ = len(y)
        self.step_ = y.step

    def predict(self, n_samples=None):
        """Filtered waveform ``sum_k amp_k psi(nT - delay_k)`` of the fitted spikes."""
        check_is_fitted(self, "spikes_")
        n = self.n_samples_ if n_samples is None else check_int(n_samples, "n_samples", minimum=1)
        return synthesize(self.spikes_, self.kernel_, self.step_, n, strict=False).values

    def score(self, y, g):
        """Negative mean-squared error of the reconstruction against reference ``g``."""
        g = check_signal(g, "g")
        return -float(np.mean((self.predict(g.size) - g) ** 2))


class ExactRecovery(_SpikeRecovery):
    """Spike recovery from ideally folded, unquantized samples.

    Parameters
    ----------
    kernel : KernelModel or dict
    n_spikes : int
    diff_order : int
        Difference order used for unfolding.
    lam : float
        Folding threshold of the samples (ignored for ``FoldedSignal`` input).
    step : float
        Sampling step (ignored for ``FoldedSignal`` input).
    n_bins : int or None
        Positive DFT bins handed to Prony's method; ``None`` picks a default.

    Attributes
    ----------
    amplitudes_, delays_ : ndarray
    sampling_step_bound_ : float
        Largest step for which unfolding is guaranteed, evaluated with the
        fitted total variation.
    """

    def __init__(self, kernel=None, n_spikes=1, diff_order=1, lam=1.0, step=1.0, n_bins=None):
        self.kernel = kernel
        self.n_spikes = n_spikes
        self.diff_order = diff_order
        self.lam = lam
        self.step = step
        self.n_bins = n_bins

    def _params(self, y, kernel, tv_norm):
        return ExactParams(
            K=self.n_spikes,
            L=max(kernel.order, self.diff_order),
            h=self.diff_order,
            gamma=kernel.gamma,
            lam=y.lam,
            tv_norm=tv_norm,
            kernel_sup=kernel_sup_norm(kernel),
            window=len(y) * y.step,
        )

    def fit(self, y, g=None):
        kernel = _as_kernel(self.kernel)
        check_positive(self.lam, "lam")
        y = _as_folded(y, self.lam, 0, self.step)
        self.kernel_ = kernel
        # the total variation only enters the step bound, so a placeholder suffices here
        spikes = recover_exact(y, kernel, self._params(y, kernel, 1.0), self.n_bins)
        self._store(spikes, y)
        tv = spikes.tv_norm
        self.sampling_step_bound_ = max_sampling_step(self._params(y, kernel, tv)) if tv > 0 else np.inf
        return self


class SRIterSiS(_SpikeRecovery):
    """Alternating residue/spike recovery from folded, quantized samples.

    Parameters
    ----------
    kernel : KernelModel or dict
    n_spikes : int
    fold_count : int
        Number of fold corrections in the first-difference residue.
    spectral_count, outer_max, inner_max, init_count, sigma_stop, sigma_scale, data_start, seed
        Passed to :class:`ItersisConfig`.
    lam, bits, step : float, int, float
        Acquisition settings used when ``fit`` receives a plain array.

    Attributes
    ----------
    amplitudes_, delays_ : ndarray
    residue_ : ResidueModel
        Recovered fold corrections.
    n_iter_ : int
    converged_ : bool
    diagnostics_ : list of dict
        Per-iteration ``{iter, mse, stop_norm}``.
    """

    def __init__(
        self,
        kernel=None,
        n_spikes=1,
        fold_count=0,
        spectral_count=10,
        outer_max=30,
        inner_max=20,
        init_count=8,
        sigma_stop=None,
        sigma_scale=1.0,
        data_start=True,
        seed=0,
        lam=1.0,
        bits=0,
        step=1.0,
    ):
        self.kernel = kernel
        self.n_spikes = n_spikes
        self.fold_count = fold_count
        self.spectral_count = spectral_count
        self.outer_max = outer_max
        self.inner_max = inner_max
        self.init_count = init_count
        self.sigma_stop = sigma_stop
        self.sigma_scale = sigma_scale
        self.data_start = data_start
        self.seed = seed
        self.lam = lam
        self.bits = bits
        self.step = step

    def config(self):
        return ItersisConfig(
            fold_count=self.fold_count,
            order=self.n_spikes,
            spectral_count=self.spectral_count,
            outer_max=self.outer_max,
            inner_max=self.inner_max,
            init_count=self.init_count,
            sigma_stop=self.sigma_stop,
            sigma_scale=self.sigma_scale,
            data_start=self.data_start,
            seed=self.seed,
        )

    def fit(self, y, g=None):
        kernel = _as_kernel(self.kernel)
        y = _as_folded(y, self.lam, self.bits, self.step)
        result = itersis_recover(y, kernel, self.config())
        self.kernel_ = kernel
        self._store(result.spikes, y)
        self.result_ = result
        self.residue_ = result.residue
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.diagnostics_ = list(result.trace)
        return self
