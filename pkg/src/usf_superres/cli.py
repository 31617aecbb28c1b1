"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 when a numerical
degeneracy aborts the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .bench import ClippingConfig, CurveConfig, SeparationConfig, run_clipping_demo, run_curve, run_separation_sweep
from .exceptions import ConfigError, DegenerateError
from .exact import recover_exact
from .forward import SceneSpec, make_tof_scene, synthesize
from .frontend import AcquisitionConfig, acquire
from .itersis import itersis_recover
from .kernels import approximation_error_bound, derivative_sup_bound, favard_constant, kernel_sup_norm

log = logging.getLogger("usf_superres")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

SIMULATE_KEYS = {
    "kernel", "spikes", "scene", "step", "count", "lam", "bits", "mode",
    "full_scale", "noise_sigma", "dr", "seed",
}  # fmt: skip


def _kernel_arg(path, step=1.0):
    return io.bench_kernel(step) if path is None else io.load_kernel(path)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_doc(args):
    return {} if args.config is None else io.read_json(args.config)


def cmd_simulate(args):
    """Scene + kernel -> clean samples, ADC output and ground truth."""
    doc = _config_doc(args)
    unknown = sorted(set(doc) - SIMULATE_KEYS)
    if unknown:
        raise ConfigError(f"unknown simulate keys: {', '.join(unknown)}")
    step = float(doc.get("step", 1.0))
    count = doc.get("count", 501)
    kernel = io.kernel_from_dict(doc["kernel"]) if doc.get("kernel") else io.bench_kernel(step)
    if "spikes" in doc:
        spikes = io.spikes_from_dict(doc["spikes"])
    elif "scene" in doc:
        scene = doc["scene"]
        if not isinstance(scene, dict):
            raise ConfigError("scene must be an object {distances, reflectivities}")
        spikes = make_tof_scene(SceneSpec(scene.get("distances", ()), scene.get("reflectivities", ())))
    else:
        raise ConfigError("simulate needs either 'spikes' or 'scene'")
    g = synthesize(spikes, kernel, step, count).values
    if doc.get("dr") is not None:
        peak = np.max(np.abs(g))
        if peak == 0:
            raise ConfigError("cannot scale an all-zero signal to a dynamic range")
        s = float(doc["dr"]) * float(doc.get("lam", 1.0)) / peak
        spikes, g = spikes.scaled(s), g * s
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    acq = AcquisitionConfig(
        lam=doc.get("lam", 1.0),
        bits=doc.get("bits", 0),
        mode=doc.get("mode", "modulo"),
        full_scale=doc.get("full_scale"),
        noise_sigma=doc.get("noise_sigma", 0.0),
        seed=seed,
        step=step,
    )
    y = acquire(g, acq)
    out = _out_dir(args)
    io.save_folded(out / "signal.csv", y)
    io.save_sampled(out / "clean.csv", synthesize(spikes, kernel, step, count))
    io.save_spikes(out / "truth.json", spikes)
    io.save_kernel(out / "kernel.json", kernel)
    print(f"wrote {out / 'signal.csv'} ({len(y)} samples)")
    return EXIT_OK


def cmd_recover(args):
    y = io.load_folded(args.signal)
    kernel = _kernel_arg(args.kernel, y.step)
    out = _out_dir(args)
    if args.method == "theorem1":
        if args.params is None:
            raise ConfigError("recover --method theorem1 needs --params")
        p = io.load_exact_params(args.params)
        spikes = recover_exact(y, kernel, p)
        io.save_spikes(out / "spikes.json", spikes)
    else:
        if args.params is None:
            raise ConfigError("recover --method itersis needs --params")
        cfg = io.load_itersis_config(args.params)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        result = itersis_recover(y, kernel, cfg)
        spikes = result.spikes
        io.save_spikes(out / "spikes.json", spikes)
        io.save_residue(out / "residue.json", result.residue)
        io.save_trace(out / "diagnostics.csv", result.trace)
        if not result.converged:
            log.warning("stopping rule not met after %d iterations", result.iterations)
    print(json.dumps(io.spikes_to_dict(spikes)))
    return EXIT_OK


def _bench(args, cls, runner, parallel=True):
    doc = _config_doc(args)
    if not isinstance(doc, dict):
        raise ConfigError("benchmark config must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        if "trials" not in cls.__dataclass_fields__:
            raise ConfigError("--trials does not apply to this experiment")
        doc["trials"] = args.trials
    cfg = cls.from_dict(doc)
    report = runner(cfg, workers=args.threads) if parallel else runner(cfg)
    out = _out_dir(args)
    stem = report.kind
    (out / f"{stem}_report.json").write_text(report.to_json())
    (out / f"{stem}_report.csv").write_text(report.to_csv())
    io.write_json(out / f"{stem}_timing.json", report.timing)
    for cell in report.cells:
        if not cell.get("valid", True):
            log.warning("cell bits=%s dr=%s has no successful trial", cell.get("bits"), cell.get("dr"))
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_bench_curve(args):
    return _bench(args, CurveConfig, run_curve)


def cmd_bench_separation(args):
    return _bench(args, SeparationConfig, run_separation_sweep)


def cmd_bench_clipping(args):
    return _bench(args, ClippingConfig, run_clipping_demo, parallel=False)


def cmd_kernel_info(args):
    path = args.kernel or (args.config if args.config else None)
    kernel = _kernel_arg(path)
    L = kernel.order
    sup = kernel_sup_norm(kernel)
    window = args.window if args.window is not None else 2 * kernel.width
    info = {
        "order": L,
        "gamma": kernel.gamma,
        "width": kernel.width,
        "sup_norm": sup,
        "favard_constant": favard_constant(L),
        "window": window,
        "max_index": args.max_index,
        "approximation_error_bound": approximation_error_bound(kernel, window, args.max_index, sup) if L >= 1 else None,
        "derivative_sup_bounds": {str(h): derivative_sup_bound(kernel, h, sup) for h in range(L + 1)},
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="usf-superres", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--trials", type=int, help="override the configured trial count")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="scene + kernel -> folded signal files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", parents=[common], help="recover spikes from a folded signal")
    p.add_argument("--method", choices=("theorem1", "itersis"), required=True)
    p.add_argument("--signal", required=True, help="signal CSV (n,y) with its JSON sidecar")
    p.add_argument("--kernel", help="kernel JSON (default: shipped benchmark kernel)")
    p.add_argument("--params", help="recovery parameters JSON")
    p.set_defaults(func=cmd_recover)

    for name, func, text in (
        ("bench-curve", cmd_bench_curve, "MSE versus bits and dynamic range"),
        ("bench-separation", cmd_bench_separation, "delay-gap error versus target separation"),
        ("bench-clipping", cmd_bench_clipping, "one instance through both ADCs"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func)

    p = sub.add_parser("kernel-info", parents=[common], help="print kernel constants and bounds")
    p.add_argument("--kernel", help="kernel JSON (default: shipped benchmark kernel)")
    p.add_argument("--window", type=float, help="observation window (default: twice the support)")
    p.add_argument("--max-index", type=int, default=8, help="Fourier truncation index (default 8)")
    p.set_defaults(func=cmd_kernel_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if getattr(args, "trials", None) is not None and args.trials < 1:
            raise ConfigError("--trials must be at least 1")
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be at least 1")
        if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
