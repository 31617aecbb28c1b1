"""Config-driven Monte Carlo experiments comparing modulo and clipping ADCs.

Every trial draws its randomness from ``(seed, trial index)`` only, trials
run in an optional process pool, and the reducer walks results in trial
order. Reports are therefore bit-identical for a given config and seed,
whatever the worker count. Wall-clock timestamps are kept out of the report
and returned separately.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import check_int, check_positive
from .exceptions import ConfigError, DegenerateError
from .forward import SPEED_OF_LIGHT, SpikeTrain, fidelity, synthesize
from .frontend import AcquisitionConfig, acquire, modular_decompose, trial_rng
from .itersis import ItersisConfig, itersis_recover, solve_p2
from .kernels import KernelModel
from .spectral import finite_difference

__all__ = [
    "CurveConfig",
    "SeparationConfig",
    "ClippingConfig",
    "ExperimentReport",
    "run_curve",
    "run_separation_sweep",
    "run_clipping_demo",
    "config_digest",
    "MSE_FLOOR",
]

# MSE values are floored before taking dB so exact recoveries stay finite
MSE_FLOOR = 1e-30
CSV_HEADER = ("bits", "dr", "usf_mse_db", "conv_mse_db", "gain_db")


def _db(x):
    return 10.0 * math.log10(max(float(x), MSE_FLOOR))


def _finite(x):
    """JSON-safe float: non-finite values become ``None``."""
    x = float(x)
    return x if math.isfinite(x) else None


def _check_list(values, name, kind=float, positive=True):
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    out = []
    for v in values:
        if kind is int:
            out.append(check_int(v, name, minimum=0))
        else:
            out.append(check_positive(v, name, allow_zero=not positive))
    return tuple(out)


def _resolve_kernel(kernel, step):
    """Kernel from an inline dict, or the shipped benchmark kernel scaled by ``step``."""
    from .io import bench_kernel, kernel_from_dict

    if kernel is None:
        return bench_kernel(step)
    if isinstance(kernel, KernelModel):
        return kernel
    return kernel_from_dict(kernel)


@dataclass(frozen=True)
class _Common:
    """Settings shared by all experiments."""

    seed: int = 0
    lam: float = 1.0
    count: int = 501
    step: float = 1.0
    spectral_count: int = 8
    noise_sigma: float = 0.0
    kernel: dict | None = None
    outer_max: int = 10
    inner_max: int = 4
    init_count: int = 1

    def _check_common(self):
        check_int(self.seed, "seed", minimum=0, maximum=2**64 - 1)
        check_positive(self.lam, "lam")
        check_int(self.count, "count", minimum=16)
        check_positive(self.step, "step")
        check_int(self.spectral_count, "spectral_count", minimum=2)
        check_positive(self.noise_sigma, "noise_sigma", allow_zero=True)
        for name in ("outer_max", "inner_max", "init_count"):
            check_int(getattr(self, name), name, minimum=1)
        if self.kernel is not None and not isinstance(self.kernel, (dict, KernelModel)):
            raise ConfigError("kernel must be an object {coeffs, gamma, order} or null")

    def resolved_kernel(self):
        return _resolve_kernel(self.kernel, self.step)

    def itersis(self, fold_count, order):
        return ItersisConfig(
            fold_count=fold_count,
            order=order,
            spectral_count=self.spectral_count,
            outer_max=self.outer_max,
            inner_max=self.inner_max,
            init_count=self.init_count,
            seed=self.seed,
        )

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError(f"{cls.__name__} must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        doc = {k: (tuple(v) if isinstance(v, list) and k != "kernel" else v) for k, v in doc.items()}
        return cls(**doc)

    def to_dict(self):
        out = asdict(self)
        if isinstance(self.kernel, KernelModel):
            out["kernel"] = {"coeffs": list(self.kernel.coeffs), "gamma": self.kernel.gamma, "order": self.kernel.order}
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in out.items()}


@dataclass(frozen=True)
class CurveConfig(_Common):
    """MSE-versus-bit-budget grid for a weak/strong spike pair.

    ``separation`` is in units of ``step``; amplitudes are
    ``(ratio, 1)`` in random order, scaled so that ``max |g| = dr * lam``.
    """

    bits: tuple = (3, 6, 9, 12, 15)
    dr: tuple = (10.0, 20.0, 30.0)
    trials: int = 200
    separation: float = 75.0
    amplitude_ratio: float = 10.0

    def __post_init__(self):
        self._check_common()
        object.__setattr__(self, "bits", _check_list(self.bits, "bits", int))
        object.__setattr__(self, "dr", _check_list(self.dr, "dr"))
        check_int(self.trials, "trials", minimum=1)
        check_positive(self.separation, "separation")
        check_positive(self.amplitude_ratio, "amplitude_ratio")


@dataclass(frozen=True)
class SeparationConfig(_Common):
    """Delay-gap error versus target separation (metres, round trip ``2d/c``)."""

    separations_m: tuple = (1.6, 1.3, 1.0, 0.7)
    bits: int = 3
    dr: float = 10.0
    trials: int = 20
    reflectivities: tuple = (1.0, 0.8)
    step: float = 0.77e-9
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        self._check_common()
        seps = _check_list(self.separations_m, "separations_m", positive=False)
        if any(s == 0 for s in seps):
            raise ConfigError("separations must be non-zero: coincident delays cannot be resolved")
        object.__setattr__(self, "separations_m", seps)
        check_int(self.bits, "bits", minimum=0, maximum=24)
        check_positive(self.dr, "dr")
        check_int(self.trials, "trials", minimum=1)
        refl = tuple(float(r) for r in self.reflectivities)
        if len(refl) != 2 or not all(math.isfinite(r) and r != 0 for r in refl):
            raise ConfigError("reflectivities must be two non-zero reals")
        object.__setattr__(self, "reflectivities", refl)
        check_positive(self.c, "c")


@dataclass(frozen=True)
class ClippingConfig(_Common):
    """One deterministic weak/strong instance seen by both ADCs."""

    dr: float = 20.0
    bits: int = 10
    separation: float = 75.0
    amplitude_ratio: float = 10.0
    first_delay: float = 100.0

    def __post_init__(self):
        self._check_common()
        check_positive(self.dr, "dr")
        check_int(self.bits, "bits", minimum=0, maximum=24)
        check_positive(self.separation, "separation")
        check_positive(self.amplitude_ratio, "amplitude_ratio")
        check_positive(self.first_delay, "first_delay", allow_zero=True)


def config_digest(kind, cfg):
    """SHA-256 of the canonical JSON of ``(kind, config)``."""
    text = json.dumps({"kind": kind, "config": cfg.to_dict()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class ExperimentReport:
    """Aggregated benchmark output.

    ``cells`` holds one dict per grid cell with ``bits, dr, trial_count,
    failures, valid`` and the MSE statistics (dB) for both ADCs;
    ``gain_db = conv_mse_db - usf_mse_db`` where both are per-trial medians.
    ``timing`` (wall-clock start/end) is excluded from :meth:`to_dict` so
    reports stay reproducible.
    """

    kind: str
    seed: int
    config: dict
    config_digest: str
    cells: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "config_digest": self.config_digest,
            "cells": self.cells,
            "extra": self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_rows(self):
        """Flat rows ``bits,dr,usf_mse_db,conv_mse_db,gain_db`` (blank when undefined)."""
        rows = []
        for c in self.cells:
            row = [c.get("bits"), c.get("dr")] + [c.get(k) for k in ("usf_mse_db", "conv_mse_db", "gain_db")]
            rows.append(["" if v is None else (repr(v) if isinstance(v, float) else str(v)) for v in row])
        return rows

    def to_csv(self):
        lines = [",".join(CSV_HEADER)] + [",".join(r) for r in self.csv_rows()]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trial execution


def _init_worker():
    # one BLAS thread per process keeps results independent of the pool size
    threadpool_limits(1)


def _run_trials(fn, jobs, workers):
    """Evaluate ``fn`` on every job and return results in job order."""
    workers = check_int(workers, "workers", minimum=1)
    if workers == 1 or len(jobs) <= 1:
        with threadpool_limits(1):
            return [fn(j) for j in jobs]
    ctx = mp.get_context("spawn")
    chunk = max(1, len(jobs) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker) as ex:
        return list(ex.map(fn, jobs, chunksize=chunk))


def _recover_usf(g, kernel, cfg, bits, order, trial, lam=None):
    """ITERSIS on modulo samples of ``g``; returns (spikes or None, estimate waveform)."""
    lam = cfg.lam if lam is None else lam
    N = g.size
    _, residue = modular_decompose(g, lam)
    folds = int(np.count_nonzero(np.diff(residue)))
    acq = AcquisitionConfig(lam=lam, bits=bits, noise_sigma=cfg.noise_sigma, seed=cfg.seed, trial=trial, step=cfg.step)
    y = acquire(g, acq)
    try:
        res = itersis_recover(y, kernel, cfg.itersis(folds, order))
    except (DegenerateError, np.linalg.LinAlgError):
        return None, np.zeros(N), folds
    est = synthesize(res.spikes, kernel, cfg.step, N, strict=False).values
    return res.spikes, est, folds


def _recover_conventional(g, kernel, cfg, bits, order, trial):
    """Clip at ``lam``, quantize, then fit spikes directly to the clipped differences."""
    N = g.size
    acq = AcquisitionConfig(
        lam=cfg.lam, bits=bits, mode="conventional", noise_sigma=cfg.noise_sigma, seed=cfg.seed, trial=trial, step=cfg.step
    )
    y = acquire(g, acq)
    try:
        spikes = solve_p2(finite_difference(y.values, 1), kernel, order, cfg.spectral_count, cfg.step)
    except (DegenerateError, np.linalg.LinAlgError):
        return None, np.zeros(N)
    return spikes, synthesize(spikes, kernel, cfg.step, N, strict=False).values


def _pair_scene(rng, kernel, cfg, separation, ratio):
    """Two spikes ``separation`` apart at a uniform random start, amplitudes in random order."""
    T = cfg.step
    lo = 2 * T
    hi = (cfg.count - 2) * T - separation - kernel.width
    if hi <= lo:
        raise ConfigError("the pulse pair does not fit in the observation window")
    t1 = rng.uniform(lo, hi)
    amps = np.array([ratio, 1.0]) if rng.random() < 0.5 else np.array([1.0, ratio])
    return SpikeTrain(amps, np.array([t1, t1 + separation]))


def _scaled_to_dr(spikes, kernel, cfg, dr, lam=None):
    lam = cfg.lam if lam is None else lam
    g = synthesize(spikes, kernel, cfg.step, cfg.count).values
    s = dr * lam / np.max(np.abs(g))
    return spikes.scaled(s), g * s


def _delay_errors(truth, est):
    """(max absolute delay error, absolute delay-gap error) in seconds, NaN on failure."""
    if est is None or est.count != truth.count:
        return math.nan, math.nan
    d = np.sort(est.delays)
    err = float(np.max(np.abs(d - truth.delays)))
    gap = float(abs((d[-1] - d[0]) - (truth.delays[-1] - truth.delays[0])))
    return err, gap


def _curve_trial(job):
    cfg, kernel, trial, bits, dr = job
    rng = trial_rng(cfg.seed, trial)
    spikes = _pair_scene(rng, kernel, cfg, cfg.separation * cfg.step, cfg.amplitude_ratio)
    spikes, g = _scaled_to_dr(spikes, kernel, cfg, dr)
    u_spikes, u_est, _ = _recover_usf(g, kernel, cfg, bits, 2, trial)
    c_spikes, c_est = _recover_conventional(g, kernel, cfg, bits, 2, trial)
    return {
        "usf_mse": float(np.mean((g - u_est) ** 2)),
        "conv_mse": float(np.mean((g - c_est) ** 2)),
        "usf_ok": u_spikes is not None,
        "conv_ok": c_spikes is not None,
        "usf_delay": _delay_errors(spikes, u_spikes),
        "conv_delay": _delay_errors(spikes, c_spikes),
    }


def _quantiles(values, qs=(0.5, 0.9)):
    v = np.asarray([x for x in values if math.isfinite(x)])
    if v.size == 0:
        return {f"q{int(q * 100)}": None for q in qs}
    return {f"q{int(q * 100)}": float(np.quantile(v, q)) for q in qs}


def _reduce_cell(results, bits, dr, trials):
    """Statistics of one grid cell; failed recoveries count as a zero estimate."""
    usf = np.array([r["usf_mse"] for r in results])
    conv = np.array([r["conv_mse"] for r in results])
    usf_db = np.array([_db(x) for x in usf])
    conv_db = np.array([_db(x) for x in conv])
    ok = sum(r["usf_ok"] for r in results)
    cell = {
        "bits": bits,
        "dr": dr,
        "trial_count": trials,
        "failures": {"usf": trials - ok, "conventional": trials - sum(r["conv_ok"] for r in results)},
        "valid": ok > 0,
        "usf_mse_db": None,
        "conv_mse_db": None,
        "gain_db": None,
        "usf_mean_mse_db": None,
        "conv_mean_mse_db": None,
        "usf_delay_error_s": _quantiles(r["usf_delay"][0] for r in results),
        "conv_delay_error_s": _quantiles(r["conv_delay"][0] for r in results),
        "usf_gap_error_s": _quantiles(r["usf_delay"][1] for r in results),
        "conv_gap_error_s": _quantiles(r["conv_delay"][1] for r in results),
    }
    if cell["valid"]:
        u, c = float(np.median(usf_db)), float(np.median(conv_db))
        cell.update(
            usf_mse_db=u,
            conv_mse_db=c,
            gain_db=c - u,
            usf_mean_mse_db=_db(np.mean(usf)),
            conv_mean_mse_db=_db(np.mean(conv)),
        )
    return cell


def _report(kind, cfg, cells, extra, started):
    return ExperimentReport(
        kind=kind,
        seed=cfg.seed,
        config=cfg.to_dict(),
        config_digest=config_digest(kind, cfg),
        cells=cells,
        extra=extra,
        timing={"started_unix": started, "finished_unix": time.time()},
    )


# ---------------------------------------------------------------------------
# experiments


def run_curve(config, workers=1):
    """Median waveform MSE of both ADCs over a ``bits x dr`` grid.

    Parameters
    ----------
    config : CurveConfig or dict
    workers : int
        Worker processes; results do not depend on it.

    Returns
    -------
    ExperimentReport
        One cell per ``(bits, dr)``, row-major in ``bits``.
    """
    cfg = config if isinstance(config, CurveConfig) else CurveConfig.from_dict(config)
    started = time.time()
    kernel = cfg.resolved_kernel()
    grid = [(b, d) for b in cfg.bits for d in cfg.dr]
    jobs = [(cfg, kernel, t, b, d) for b, d in grid for t in range(cfg.trials)]
    results = _run_trials(_curve_trial, jobs, workers)
    cells = []
    for i, (b, d) in enumerate(grid):
        chunk = results[i * cfg.trials : (i + 1) * cfg.trials]
        cells.append(_reduce_cell(chunk, b, d, cfg.trials))
    extra = {"separation_steps": cfg.separation, "mse": "waveform, per trial, median over trials"}
    return _report("curve", cfg, cells, extra, started)


def _separation_trial(job):
    cfg, kernel, trial, sep_m = job
    rng = trial_rng(cfg.seed, trial)
    gap = 2.0 * abs(sep_m) / cfg.c
    T = cfg.step
    hi = (cfg.count - 2) * T - gap - kernel.width
    if hi <= 2 * T:
        raise ConfigError("the pulse pair does not fit in the observation window")
    t1 = rng.uniform(2 * T, hi)
    spikes = SpikeTrain(np.array(cfg.reflectivities), np.array([t1, t1 + gap]))
    spikes, g = _scaled_to_dr(spikes, kernel, cfg, cfg.dr)
    est_spikes, est, folds = _recover_usf(g, kernel, cfg, cfg.bits, 2, trial)
    err, gap_err = _delay_errors(spikes, est_spikes)
    return {"ok": est_spikes is not None, "gap_error": gap_err, "delay_error": err, "mse": float(np.mean((g - est) ** 2)), "folds": folds}


def run_separation_sweep(config, workers=1):
    """Delay-gap error of the modulo pipeline per target separation.

    Separations below one sampling step are flagged ``resolvable: false``
    and still run.
    """
    cfg = config if isinstance(config, SeparationConfig) else SeparationConfig.from_dict(config)
    started = time.time()
    kernel = cfg.resolved_kernel()
    jobs = [(cfg, kernel, t, s) for s in cfg.separations_m for t in range(cfg.trials)]
    results = _run_trials(_separation_trial, jobs, workers)
    cells = []
    for i, s in enumerate(cfg.separations_m):
        chunk = results[i * cfg.trials : (i + 1) * cfg.trials]
        gap = 2.0 * abs(s) / cfg.c
        ok = sum(r["ok"] for r in chunk)
        gaps = [r["gap_error"] for r in chunk]
        finite = [x for x in gaps if math.isfinite(x)]
        cells.append(
            {
                "bits": cfg.bits,
                "dr": cfg.dr,
                "separation_m": s,
                "delay_gap_s": gap,
                "trial_count": cfg.trials,
                "failures": cfg.trials - ok,
                "valid": ok > 0,
                "resolvable": gap >= cfg.step,
                "median_gap_error_s": float(np.median(finite)) if finite else None,
                "gap_error_s": _quantiles(gaps),
                "delay_error_s": _quantiles(r["delay_error"] for r in chunk),
                "usf_mse_db": _finite(np.median([_db(r["mse"]) for r in chunk])),
                "mean_folds": float(np.mean([r["folds"] for r in chunk])),
            }
        )
    med = [c["median_gap_error_s"] for c in cells]
    extra = {"median_gap_error_s": med}
    return _report("separation", cfg, cells, extra, started)


def run_clipping_demo(config):
    """Recover one weak/strong instance with both ADCs and compare waveform PSNR."""
    cfg = config if isinstance(config, ClippingConfig) else ClippingConfig.from_dict(config)
    started = time.time()
    kernel = cfg.resolved_kernel()
    T = cfg.step
    t1 = cfg.first_delay * T
    spikes = SpikeTrain(np.array([cfg.amplitude_ratio, 1.0]), np.array([t1, t1 + cfg.separation * T]))
    spikes, g = _scaled_to_dr(spikes, kernel, cfg, cfg.dr)
    with threadpool_limits(1):
        u_spikes, u_est, folds = _recover_usf(g, kernel, cfg, cfg.bits, 2, 0)
        c_spikes, c_est = _recover_conventional(g, kernel, cfg, cfg.bits, 2, 0)

    def side(sp, est):
        fid = fidelity(g, est)
        return {
            "spikes": None if sp is None else {"amplitudes": sp.amplitudes.tolist(), "delays_s": sp.delays.tolist()},
            "mse": fid["mse"],
            "mse_db": _db(fid["mse"]),
            "psnr_db": _finite(fid["psnr_db"]),
            "exact": fid["mse"] == 0,
        }

    usf, conv = side(u_spikes, u_est), side(c_spikes, c_est)
    cell = {
        "bits": cfg.bits,
        "dr": cfg.dr,
        "trial_count": 1,
        "valid": u_spikes is not None,
        "usf_mse_db": usf["mse_db"],
        "conv_mse_db": conv["mse_db"],
        "gain_db": conv["mse_db"] - usf["mse_db"],
    }
    extra = {
        "ground_truth": {"amplitudes": spikes.amplitudes.tolist(), "delays_s": spikes.delays.tolist()},
        "usf": usf,
        "conventional": conv,
        "folds": folds,
    }
    return _report("clipping", cfg, [cell], extra, started)
