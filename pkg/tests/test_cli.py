import json

import numpy as np
import pytest

from usf_superres.cli import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_OK, main


@pytest.fixture
def simulated(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"spikes": {"amplitudes": [10.0, 1.0], "delays_s": [100.3, 175.3]}, "dr": 6, "bits": 10}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "sim")]) == EXIT_OK
    return tmp_path


def test_simulate_writes_files(simulated):
    out = simulated / "sim"
    assert {p.name for p in out.iterdir()} >= {"signal.csv", "signal.json", "clean.csv", "truth.json", "kernel.json"}


def test_recover_itersis(simulated, capsys):
    from usf_superres import io
    from usf_superres.frontend import modular_decompose

    g = io.load_sampled(simulated / "sim" / "clean.csv", 1.0).values
    M = int(np.count_nonzero(np.diff(modular_decompose(g, 1.0)[1])))
    params = simulated / "it.json"
    params.write_text(json.dumps({"fold_count": M, "order": 2, "spectral_count": 8, "init_count": 1, "inner_max": 4}))
    out = simulated / "rec"
    code = main(["recover", "--method", "itersis", "--signal", str(simulated / "sim" / "signal.csv"), "--params", str(params), "--out", str(out)])
    assert code == EXIT_OK
    spikes = json.loads((out / "spikes.json").read_text())
    np.testing.assert_allclose(spikes["delays_s"], [100.3, 175.3], atol=0.05)
    assert (out / "diagnostics.csv").read_text().startswith("iter,mse,stop_norm\n")
    assert len(json.loads((out / "residue.json").read_text())["positions"]) == M


def test_recover_theorem1(simulated):
    params = simulated / "p.json"
    doc = {"K": 2, "L": 3, "h": 1, "gamma": 32.0, "lam": 1.0, "tv_norm": 1.0, "kernel_sup": 1.0, "window": 501.0}
    params.write_text(json.dumps(doc))
    out = simulated / "rec"
    args = ["recover", "--method", "theorem1", "--signal", str(simulated / "sim" / "signal.csv"), "--params", str(params)]
    assert main(args + ["--out", str(out)]) == EXIT_OK
    assert set(json.loads((out / "spikes.json").read_text())) == {"amplitudes", "delays_s"}


def test_config_errors_exit_2(simulated, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"K": 2}))
    sig = str(simulated / "sim" / "signal.csv")
    assert main(["recover", "--method", "theorem1", "--signal", sig, "--params", str(bad)]) == EXIT_CONFIG
    assert main(["recover", "--method", "itersis", "--signal", str(tmp_path / "missing.csv"), "--params", str(bad)]) == EXIT_CONFIG
    assert main(["bench-curve", "--trials", "0"]) == EXIT_CONFIG
    bad.write_text(json.dumps({"separations_m": [0.0]}))
    assert main(["bench-separation", "--config", str(bad)]) == EXIT_CONFIG


def test_degeneracy_exits_3(tmp_path):
    # a box kernel has spectral zeros, so the deconvolution hits a dead bin
    (tmp_path / "k.json").write_text(json.dumps({"coeffs": [1.0], "gamma": 10.0, "order": 0}))
    (tmp_path / "s.csv").write_text("n,y\n" + "".join(f"{i},0.0\n" for i in range(100)))
    (tmp_path / "s.json").write_text(json.dumps({"lambda": 1.0, "bits": 0, "mode": "modulo", "step": 1.0, "seed": 0}))
    (tmp_path / "p.json").write_text(json.dumps({"fold_count": 0, "order": 1, "spectral_count": 12}))
    args = ["recover", "--method", "itersis", "--signal", str(tmp_path / "s.csv"), "--kernel", str(tmp_path / "k.json")]
    assert main(args + ["--params", str(tmp_path / "p.json"), "--out", str(tmp_path)]) == EXIT_DEGENERATE


def test_bench_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bits": [6], "dr": [10.0]}))
    assert main(["bench-curve", "--config", str(cfg), "--trials", "2", "--seed", "3", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "curve_report.json").read_text())
    assert report["seed"] == 3 and report["config"]["trials"] == 2
    assert (tmp_path / "curve_report.csv").read_text().startswith("bits,dr,usf_mse_db,conv_mse_db,gain_db\n")
    assert "started_unix" in json.loads((tmp_path / "curve_timing.json").read_text())
    assert main(["bench-clipping", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "clipping_report.json").exists()


def test_kernel_info(capsys):
    assert main(["kernel-info"]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["order"] == 3
    assert {"favard_constant", "approximation_error_bound", "derivative_sup_bounds"} <= set(info)
