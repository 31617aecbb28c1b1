"""Plain-text serialization of signals, spike trains, kernels and configs.

Sequences go to CSV with an ``n,<name>`` header; everything else is JSON.
Files are written with sorted keys and ``repr``-exact floats so that two
writes of the same object are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from .exact import ExactParams
from .exceptions import ConfigError
from .forward import SampledSignal, SpikeTrain
from .frontend import FoldedSignal, ResidueModel
from .itersis import ItersisConfig
from .kernels import KernelModel

__all__ = [
    "read_json",
    "write_json",
    "load_kernel",
    "save_kernel",
    "bench_kernel",
    "save_folded",
    "load_folded",
    "save_spikes",
    "load_spikes",
    "save_sampled",
    "load_sampled",
    "save_residue",
    "load_residue",
    "save_trace",
    "load_exact_params",
    "load_itersis_config",
]


def read_json(path):
    """Parse a JSON file, mapping I/O and syntax problems to ``ConfigError``."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _require(doc, keys, what):
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ConfigError(f"{what} is missing keys: {', '.join(missing)}")


def _from_dict(cls, doc, what):
    """Build a dataclass from a dict, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{what} has unknown keys: {', '.join(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


# kernels


def kernel_from_dict(doc):
    _require(doc, ("coeffs", "gamma", "order"), "kernel")
    try:
        return KernelModel(tuple(float(c) for c in doc["coeffs"]), float(doc["gamma"]), doc["order"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"kernel: {exc}") from exc


def kernel_to_dict(kernel):
    return {"coeffs": [float(c) for c in kernel.coeffs], "gamma": float(kernel.gamma), "order": int(kernel.order)}


def load_kernel(path):
    return kernel_from_dict(read_json(path))


def save_kernel(path, kernel):
    write_json(path, kernel_to_dict(kernel))


def bench_kernel(step=1.0):
    """The order-3 spline kernel shipped for benchmarks, with ``gamma`` scaled by ``step``."""
    doc = json.loads(resources.files(__package__).joinpath("data/bench_kernel.json").read_text())
    doc["gamma"] = float(doc["gamma"]) * step
    return kernel_from_dict(doc)


# sequences


def _write_column(path, name, values, integer=False):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", name])
        for i, v in enumerate(values):
            w.writerow([i, int(v) if integer else repr(float(v))])


def _read_column(path, name):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["n", name]:
        raise ConfigError(f"{path}: expected header 'n,{name}'")
    body = [r for r in rows[1:] if r]
    try:
        idx = np.array([int(r[0]) for r in body])
        vals = np.array([float(r[1]) for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from exc
    if not np.array_equal(idx, np.arange(idx.size)):
        raise ConfigError(f"{path}: sample indices must run 0, 1, 2, ...")
    return vals


def _sidecar(path):
    p = Path(path)
    return p.with_suffix(".json")


def save_folded(path, y):
    """Write ``n,y`` CSV plus a JSON sidecar with ``lambda, bits, mode, step, seed``."""
    _write_column(path, "y", y.values)
    meta = {"lambda": y.lam, "bits": y.bits, "mode": y.mode, "step": y.step, "seed": y.seed}
    if y.full_scale is not None:
        meta["full_scale"] = y.full_scale
    write_json(_sidecar(path), meta)


def load_folded(path, sidecar=None):
    values = _read_column(path, "y")
    meta = read_json(sidecar or _sidecar(path))
    _require(meta, ("lambda", "bits", "mode", "step", "seed"), "signal sidecar")
    try:
        return FoldedSignal(
            values,
            step=float(meta["step"]),
            lam=float(meta["lambda"]),
            bits=meta["bits"],
            mode=meta["mode"],
            full_scale=meta.get("full_scale"),
            seed=meta["seed"],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"signal sidecar: {exc}") from exc


def save_sampled(path, g):
    _write_column(path, "g", g.values)


def load_sampled(path, step):
    return SampledSignal(_read_column(path, "g"), step)


# spikes, residues, diagnostics


def spikes_to_dict(spikes):
    return {"amplitudes": [float(a) for a in spikes.amplitudes], "delays_s": [float(d) for d in spikes.delays]}


def spikes_from_dict(doc):
    _require(doc, ("amplitudes", "delays_s"), "spike train")
    try:
        return SpikeTrain(np.asarray(doc["amplitudes"], float), np.asarray(doc["delays_s"], float))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"spike train: {exc}") from exc


def save_spikes(path, spikes):
    write_json(path, spikes_to_dict(spikes))


def load_spikes(path):
    return spikes_from_dict(read_json(path))


def residue_to_dict(res):
    return {"amplitudes": [float(a) for a in res.amplitudes], "positions": [int(p) for p in res.positions]}


def save_residue(path, res):
    write_json(path, residue_to_dict(res))


def load_residue(path):
    doc = read_json(path)
    _require(doc, ("amplitudes", "positions"), "residue model")
    return ResidueModel(doc["amplitudes"], doc["positions"])


def save_trace(path, trace):
    """Per-iteration diagnostics as CSV ``iter,mse,stop_norm``."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "mse", "stop_norm"])
        for row in trace:
            w.writerow([int(row["iter"]), repr(float(row["mse"])), repr(float(row["stop_norm"]))])


# configs


def load_exact_params(path):
    return _from_dict(ExactParams, read_json(path), "exact-recovery params")


def load_itersis_config(path):
    return _from_dict(ItersisConfig, read_json(path), "itersis config")
