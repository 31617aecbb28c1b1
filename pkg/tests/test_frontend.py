import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usf_superres.exceptions import ConfigError
from usf_superres.frontend import (
    AcquisitionConfig,
    FoldedSignal,
    ResidueModel,
    acquire,
    clip,
    modular_decompose,
    modulo_fold,
    quantize_uniform,
    residue_from_sequence,
    residue_quantize,
)

reals = st.floats(-1e4, 1e4, allow_nan=False)
lams = st.floats(0.05, 10.0)


class TestModuloFold:
    @pytest.mark.parametrize("x, lam, expected", [(0.3, 0.5, 0.3), (2.5, 1.0, 0.5), (-2.5, 1.0, -0.5), (1.0, 1.0, -1.0)])
    def test_hand_values(self, x, lam, expected):
        assert modulo_fold(x, lam) == pytest.approx(expected, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(x=reals, lam=lams, k=st.integers(-10, 10))
    def test_range_and_periodicity(self, x, lam, k):
        y = modulo_fold(x, lam)
        assert -lam <= y < lam or np.isclose(y, lam)
        assert modulo_fold(x + 2 * lam * k, lam) == pytest.approx(y, abs=1e-12 * max(1.0, abs(x))) or abs(
            abs(modulo_fold(x + 2 * lam * k, lam) - y) - 2 * lam
        ) < 1e-9 * max(1.0, abs(x))

    @settings(max_examples=200, deadline=None)
    @given(x=reals, lam=lams)
    def test_idempotent_and_residue_on_lattice(self, x, lam):
        y = modulo_fold(x, lam)
        assert modulo_fold(y, lam) == y
        k = (x - y) / (2 * lam)
        assert abs(k - round(k)) <= 1e-12 * max(1.0, abs(k))

    def test_rejects_nonpositive_threshold(self):
        with pytest.raises(ConfigError):
            modulo_fold(1.0, 0.0)


class TestQuantizer:
    def test_hand_values(self):
        assert quantize_uniform(0.3, 1, 1.0) == pytest.approx(0.5)
        assert quantize_uniform(10.0, 3, 1.0) == pytest.approx(0.875)
        assert quantize_uniform(-10.0, 3, 1.0) == pytest.approx(-0.875)

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-1.0, 1.0), bits=st.integers(1, 16), fs=st.floats(0.1, 10.0))
    def test_cell_bound(self, x, bits, fs):
        x *= fs
        delta = 2 * fs / 2**bits
        assert abs(quantize_uniform(x, bits, fs) - x) <= delta / 2 + 1e-12 * fs

    def test_output_levels_are_midpoints(self):
        x = np.linspace(-1, 1, 1001)
        q = quantize_uniform(x, 4, 1.0)
        levels = (np.arange(16) - 7.5) * 0.125
        assert set(np.round(q, 12)) <= set(np.round(levels, 12))


class TestClipAndResidue:
    @pytest.mark.parametrize("x, expected", [(0.2, 0.2), (3.7, 1.0), (-3.7, -1.0)])
    def test_clip(self, x, expected):
        assert clip(x, 1.0) == expected

    @pytest.mark.parametrize("x, expected", [(0.9, 0.0), (1.5, 2.0), (-2.5, -2.0)])
    def test_residue_quantize(self, x, expected):
        lam = 0.7
        assert residue_quantize(x * lam, lam) == pytest.approx(expected * lam)

    def test_modular_decompose_examples(self):
        f, r = modular_decompose([2.5], 1.0)
        assert f[0] == 0.5 and r[0] == 2.0
        f, r = modular_decompose([0.1, -0.9, 0.99], 1.0)
        assert np.all(r == 0)

    @settings(max_examples=100, deadline=None)
    @given(g=st.lists(reals, min_size=1, max_size=50), lam=lams)
    def test_decomposition_identity(self, g, lam):
        f, r = modular_decompose(g, lam)
        np.testing.assert_array_equal(f + r, np.asarray(g))
        k = r / (2 * lam)
        assert np.all(np.abs(k - np.round(k)) <= 1e-12 * np.maximum(1, np.abs(k)))

    def test_residue_model_from_sequence(self):
        m = residue_from_sequence([0, 2, 0, -2, 0])
        assert m.count == 2 and list(m.positions) == [1, 3]
        np.testing.assert_array_equal(m.to_sequence(5), [0, 2, 0, -2, 0])

    def test_residue_model_rejects_unsorted_positions(self):
        with pytest.raises(ConfigError):
            ResidueModel([2.0, 2.0], [3, 1])


class TestAcquire:
    def test_identity_path(self):
        g = np.linspace(-0.9, 0.9, 11)
        np.testing.assert_array_equal(acquire(g, AcquisitionConfig(lam=1.0)).values, g)

    def test_fold_and_clip_examples(self):
        assert acquire([2.5], AcquisitionConfig(lam=1.0)).values[0] == 0.5
        assert acquire([2.5], AcquisitionConfig(mode="conventional", full_scale=1.0)).values[0] == 1.0

    def test_deterministic_noise(self):
        cfg = AcquisitionConfig(lam=1.0, bits=6, noise_sigma=0.1, seed=7, trial=3)
        g = np.linspace(-5, 5, 200)
        a, b = acquire(g, cfg), acquire(g, cfg)
        np.testing.assert_array_equal(a.values, b.values)
        c = acquire(g, AcquisitionConfig(lam=1.0, bits=6, noise_sigma=0.1, seed=7, trial=4))
        assert not np.array_equal(a.values, c.values)

    def test_output_ranges(self):
        g = np.linspace(-20, 20, 500)
        y = acquire(g, AcquisitionConfig(lam=0.5, bits=5))
        assert np.all(np.abs(y.values) <= 0.5)
        y = acquire(g, AcquisitionConfig(mode="conventional", full_scale=2.0, bits=5))
        assert np.all(np.abs(y.values) <= 2.0)

    @pytest.mark.parametrize("kwargs", [{"lam": -1.0}, {"bits": 25}, {"mode": "log"}, {"noise_sigma": -0.1}, {"seed": -1}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigError):
            AcquisitionConfig(**kwargs)

    def test_folded_signal_range_check(self):
        with pytest.raises(ConfigError):
            FoldedSignal([0.0, 1.5], step=1.0, lam=1.0)
