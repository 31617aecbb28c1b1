import json

import numpy as np
import pytest

from usf_superres import io
from usf_superres.exceptions import ConfigError
from usf_superres.forward import SampledSignal, SpikeTrain
from usf_superres.frontend import AcquisitionConfig, ResidueModel, acquire
from usf_superres.kernels import KernelModel


def test_kernel_round_trip(tmp_path):
    k = KernelModel([0.3, 1.0, 0.6], 1.5e-9, 3)
    io.save_kernel(tmp_path / "k.json", k)
    assert json.loads((tmp_path / "k.json").read_text()) == {"coeffs": [0.3, 1.0, 0.6], "gamma": 1.5e-9, "order": 3}
    assert io.load_kernel(tmp_path / "k.json") == k


def test_bench_kernel_scales_with_step():
    assert io.bench_kernel().coeffs == (0.3, 1.0, 0.6, 0.25)
    assert io.bench_kernel(0.77e-9).gamma == pytest.approx(32 * 0.77e-9)


@pytest.mark.parametrize("doc", [{"coeffs": [1.0], "gamma": 1.0}, {"coeffs": [], "gamma": 1.0, "order": 3}, [1, 2]])
def test_bad_kernel_documents(tmp_path, doc):
    (tmp_path / "k.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        io.load_kernel(tmp_path / "k.json")


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        io.read_json(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        io.read_json(tmp_path / "bad.json")


def test_folded_signal_round_trip(tmp_path):
    g = np.linspace(-7, 7, 33) + 1e-3 * np.sin(np.arange(33))
    y = acquire(g, AcquisitionConfig(lam=0.8, bits=9, step=2e-9, seed=5))
    io.save_folded(tmp_path / "s.csv", y)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "n,y"
    meta = json.loads((tmp_path / "s.json").read_text())
    assert {"lambda", "bits", "mode", "step", "seed"} <= set(meta)
    back = io.load_folded(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, y.values)
    assert (back.lam, back.bits, back.mode, back.step, back.seed) == (0.8, 9, "modulo", 2e-9, 5)


def test_signal_csv_checks(tmp_path):
    (tmp_path / "s.csv").write_text("n,x\n0,1.0\n")
    with pytest.raises(ConfigError):
        io.load_sampled(tmp_path / "s.csv", 1.0)
    (tmp_path / "s.csv").write_text("n,g\n0,1.0\n2,1.0\n")
    with pytest.raises(ConfigError):
        io.load_sampled(tmp_path / "s.csv", 1.0)


def test_sampled_signal_round_trip(tmp_path):
    g = SampledSignal(np.random.default_rng(0).standard_normal(20), 0.5)
    io.save_sampled(tmp_path / "g.csv", g)
    np.testing.assert_array_equal(io.load_sampled(tmp_path / "g.csv", 0.5).values, g.values)


def test_spikes_round_trip(tmp_path):
    s = SpikeTrain([1.25, -0.5], [1e-8, 2.5e-8])
    io.save_spikes(tmp_path / "s.json", s)
    assert set(json.loads((tmp_path / "s.json").read_text())) == {"amplitudes", "delays_s"}
    back = io.load_spikes(tmp_path / "s.json")
    np.testing.assert_array_equal(back.amplitudes, s.amplitudes)
    np.testing.assert_array_equal(back.delays, s.delays)


def test_residue_round_trip(tmp_path):
    r = ResidueModel([2.0, -4.0], [3, 17])
    io.save_residue(tmp_path / "r.json", r)
    assert io.load_residue(tmp_path / "r.json") == r


def test_trace_csv(tmp_path):
    io.save_trace(tmp_path / "d.csv", [{"iter": 1, "mse": 0.5, "stop_norm": 0.25}])
    assert (tmp_path / "d.csv").read_text() == "iter,mse,stop_norm\n1,0.5,0.25\n"


def test_config_loaders(tmp_path):
    (tmp_path / "p.json").write_text(json.dumps({"fold_count": 3, "order": 2, "seed": 4}))
    cfg = io.load_itersis_config(tmp_path / "p.json")
    assert (cfg.fold_count, cfg.order, cfg.seed) == (3, 2, 4)
    (tmp_path / "p.json").write_text(json.dumps({"fold_count": 3, "order": 2, "typo": 1}))
    with pytest.raises(ConfigError, match="typo"):
        io.load_itersis_config(tmp_path / "p.json")
    doc = {"K": 2, "L": 3, "h": 1, "gamma": 1.0, "lam": 1.0, "tv_norm": 4.0, "kernel_sup": 0.8, "window": 100.0}
    (tmp_path / "e.json").write_text(json.dumps(doc))
    assert io.load_exact_params(tmp_path / "e.json").tv_norm == 4.0
