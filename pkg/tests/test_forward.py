import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usf_superres.exceptions import ConfigError, TruncationError
from usf_superres.forward import (
    SPEED_OF_LIGHT,
    SceneSpec,
    SpikeTrain,
    fidelity,
    kernel_samples,
    make_tof_scene,
    synthesize,
)
from usf_superres.kernels import KernelModel, kernel_sup_norm

KERNEL = KernelModel([0.3, 1.0, 0.6], 2.0, 3)


class TestSpikeTrain:
    def test_tv_norm(self):
        assert SpikeTrain([1.0, -2.0], [0.0, 1.0]).tv_norm == 3.0

    @pytest.mark.parametrize("amps, delays", [([1.0, 1.0], [2.0, 1.0]), ([1.0], [-1.0]), ([np.inf], [1.0]), ([1.0], [1.0, 2.0])])
    def test_invalid(self, amps, delays):
        with pytest.raises(ConfigError):
            SpikeTrain(amps, delays)


class TestSynthesize:
    def test_empty_train_gives_zeros(self):
        g = synthesize(SpikeTrain([], []), KERNEL, 1.0, 50)
        assert np.all(g.values == 0)

    def test_on_grid_spike_is_shifted_kernel(self):
        g = synthesize(SpikeTrain([1.0], [5.0]), KERNEL, 1.0, 60).values
        k = kernel_samples(KERNEL, 1.0, 60)
        np.testing.assert_allclose(g[5:], k[:-5], atol=1e-15)

    def test_superposition(self):
        a, b = SpikeTrain([1.5], [3.3]), SpikeTrain([-0.7], [9.1])
        both = SpikeTrain([1.5, -0.7], [3.3, 9.1])
        g = synthesize(both, KERNEL, 0.5, 80).values
        np.testing.assert_allclose(g, synthesize(a, KERNEL, 0.5, 80).values + synthesize(b, KERNEL, 0.5, 80).values)

    def test_truncation_rejected(self):
        with pytest.raises(TruncationError):
            synthesize(SpikeTrain([1.0], [40.0]), KERNEL, 1.0, 50)

    @settings(max_examples=50, deadline=None)
    @given(alpha=st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), d=st.floats(0, 20))
    def test_linearity(self, alpha, d):
        s = SpikeTrain([1.0, 0.5], [d, d + 7.0])
        np.testing.assert_allclose(
            synthesize(s.scaled(alpha), KERNEL, 1.0, 60).values, alpha * synthesize(s, KERNEL, 1.0, 60).values, atol=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(d=st.floats(0, 10))
    def test_shift_covariance(self, d):
        s = SpikeTrain([1.0, -0.4], [d, d + 9.0])
        g0 = synthesize(s, KERNEL, 1.0, 60).values
        g1 = synthesize(s.shifted(1.0), KERNEL, 1.0, 60).values
        np.testing.assert_allclose(g1[1:], g0[:-1], atol=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(a=st.lists(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-2), min_size=1, max_size=4))
    def test_young_bound(self, a):
        d = 2.5 * np.arange(len(a)) + 0.3
        g = synthesize(SpikeTrain(a, d), KERNEL, 0.25, 200).values
        assert np.max(np.abs(g)) <= np.sum(np.abs(a)) * kernel_sup_norm(KERNEL) * (1 + 1e-12)


class TestScene:
    def test_single_target(self):
        s = make_tof_scene(SceneSpec((1.5,), (1.0,)))
        assert s.delays[0] == pytest.approx(1.0007e-8, rel=1e-4)

    def test_paper_separations(self):
        s = make_tof_scene(SceneSpec((1.0, 2.8, 4.8), (1.0, 0.5, 0.2)))
        gaps = np.diff(s.delays)
        assert gaps[0] == pytest.approx(12.01e-9, rel=1e-3)
        assert gaps[1] == pytest.approx(13.34e-9, rel=1e-3)
        assert SPEED_OF_LIGHT == 2.99792458e8

    def test_amplitude_ratio_kept(self):
        s = make_tof_scene(SceneSpec((1.0, 2.0), (10.0, 1.0)))
        assert s.amplitudes[0] / s.amplitudes[1] == 10.0

    def test_distances_must_increase(self):
        with pytest.raises(ConfigError):
            SceneSpec((2.0, 1.0), (1.0, 1.0))


class TestFidelity:
    def test_exact(self):
        f = fidelity([1.0, 2.0], [1.0, 2.0])
        assert f["mse"] == 0 and math.isinf(f["psnr_db"])

    def test_hand_value(self):
        f = fidelity([1.0, 0.0], [0.0, 0.0])
        assert f["mse"] == 0.5 and f["psnr_db"] == pytest.approx(3.0103, abs=1e-4)

    def test_homogeneity(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(30), rng.standard_normal(30)
        f1, f2 = fidelity(a, b), fidelity(3 * a, 3 * b)
        assert f2["mse"] == pytest.approx(9 * f1["mse"])
        assert f2["psnr_db"] == pytest.approx(f1["psnr_db"])

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            fidelity([1.0], [1.0, 2.0])
