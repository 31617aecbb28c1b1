import numpy as np
import pytest

from _instances import folded_instance
from usf_superres.exact import (
    ExactParams,
    difference_bound,
    max_sampling_step,
    recover_exact,
    unfold_by_differences,
)
from usf_superres.exceptions import ConfigError
from usf_superres.forward import SpikeTrain, synthesize
from usf_superres.frontend import AcquisitionConfig, FoldedSignal, acquire, modulo_fold
from usf_superres.kernels import KernelModel, kernel_sup_norm
from usf_superres.spectral import finite_difference


def _params(**kw):
    base = dict(K=2, L=2, h=1, gamma=1.0, lam=1.0, tv_norm=1.0, kernel_sup=1.0, window=1e9)
    base.update(kw)
    return ExactParams(**base)


class TestSamplingStep:
    def test_rate_term(self):
        assert max_sampling_step(_params()) == pytest.approx(0.25, rel=1e-12)

    def test_count_term_and_minimum(self):
        p = _params(window=10.0)
        assert p.window / (p.L + 2 * p.zeta * p.K) == pytest.approx(10 / 6)
        assert max_sampling_step(p) == pytest.approx(0.25)
        assert max_sampling_step(_params(window=1.0)) == pytest.approx(1 / 6)

    def test_linear_in_threshold_for_first_differences(self):
        assert max_sampling_step(_params(lam=2.0)) == pytest.approx(2 * max_sampling_step(_params()))

    @pytest.mark.parametrize("kw", [{"h": 0}, {"h": 3}, {"zeta": 0.5}, {"lam": 0.0}, {"K": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            _params(**kw)

    def test_difference_bound_at_max_step_equals_threshold(self):
        p = _params(L=3, h=2, tv_norm=3.0, kernel_sup=0.7)
        assert difference_bound(p, max_sampling_step(p)) == pytest.approx(p.lam, rel=1e-12)


class TestUnfold:
    def test_no_folds_is_plain_difference(self):
        y = np.sin(np.linspace(0, 3, 40)) * 0.9
        np.testing.assert_allclose(unfold_by_differences(y, 2, 1.0), finite_difference(y, 2))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_difference_of_unfolded_signal(self, seed):
        rng = np.random.default_rng(seed)
        inst = folded_instance(rng, K=2, L=3, h=3, tv_range=(8.0, 20.0))
        assert inst.fold_count >= 3
        np.testing.assert_allclose(unfold_by_differences(inst.y, 3, 1.0), finite_difference(inst.g, 3), atol=1e-12)

    def test_suffix_shift_invariance(self):
        rng = np.random.default_rng(3)
        y = rng.uniform(-1, 1, 30) * 0.01 + np.linspace(0, 0.3, 30)
        shifted = y.copy()
        shifted[12:] += 2.0
        np.testing.assert_allclose(unfold_by_differences(shifted, 2, 1.0), unfold_by_differences(y, 2, 1.0), atol=1e-12)

    def test_difference_bound_holds_empirically(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            L = int(rng.choice([2, 3]))
            h = int(rng.integers(1, L + 1))
            inst = folded_instance(rng, K=int(rng.integers(1, 4)), L=L, h=h)
            assert np.max(np.abs(finite_difference(inst.g, h))) <= difference_bound(inst.params, inst.step) * (1 + 1e-12)


class TestRecoverExact:
    def test_single_on_grid_spike(self):
        kernel = KernelModel([0.3, 1.0, 0.6], 1.0, 2)
        T, N = 0.05, 400
        g = synthesize(SpikeTrain([3.0], [60 * T]), kernel, T, N).values
        y = acquire(g, AcquisitionConfig(lam=1.0, step=T))
        p = ExactParams(1, 2, 1, 1.0, 1.0, 3.0, kernel_sup_norm(kernel), N * T)
        est = recover_exact(y, kernel, p)
        assert est.delays[0] == pytest.approx(60 * T, abs=1e-10)
        assert est.amplitudes[0] == pytest.approx(3.0, rel=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_two_off_grid_spikes_at_high_dynamic_range(self, seed):
        rng = np.random.default_rng(100 + seed)
        inst = folded_instance(rng, K=2, L=2, h=1, tv_range=(20.0, 20.0))
        assert np.max(np.abs(inst.g)) > 5
        est = recover_exact(inst.y, inst.kernel, inst.params)
        assert np.max(np.abs(est.delays - inst.spikes.delays)) <= 1e-6 * inst.window
        np.testing.assert_allclose(est.amplitudes, inst.spikes.amplitudes, rtol=1e-6)

    def test_coarse_sampling_breaks_unfolding(self):
        broken = 0
        for seed in range(10):
            inst = folded_instance(np.random.default_rng(seed), K=2, L=2, h=2, tv_range=(20.0, 20.0), step_fraction=4.0)
            d = unfold_by_differences(inst.y, 2, 1.0)
            broken += not np.allclose(d, finite_difference(inst.g, 2), atol=1e-9)
        assert broken >= 9

    def test_requires_folded_signal(self):
        kernel = KernelModel([1.0], 1.0, 2)
        with pytest.raises(ConfigError):
            recover_exact(np.zeros(10), kernel, _params())

    def test_too_few_bins(self):
        kernel = KernelModel([1.0], 1.0, 2)
        y = FoldedSignal(modulo_fold(np.zeros(50), 1.0), step=1.0, lam=1.0)
        with pytest.raises(ConfigError):
            recover_exact(y, kernel, _params(), n_bins=3)
