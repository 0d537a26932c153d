"""Command-line front end: ``python -m wsnm <command> [options]``.

Every command accepts ``--config FILE`` (a flat JSON object whose keys are
the long option names with dashes or underscores), ``--seed``,
``--threads`` and ``--out DIR``.  Command-line flags override file values,
which override defaults.  Each run writes ``manifest.json`` into the output
directory with the resolved configuration, timings, outputs and metrics.
"""

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .bench import (
    SyntheticSpec, binarize_foreground, foreground_similarity, frange, gen_lowrank_sparse,
    log_relative_error, matrix_to_frames, relative_error, run_phase_sweep, run_table,
    video_to_matrix,
)
from .denoise import DenoiseConfig, denoise_image
from .exceptions import WsnmError
from .image import add_gaussian_noise, psnr, read_frames, read_image, read_pgm, write_f64, write_pgm
from .linalg import WeightVector, svt, wsnm_prox_spectrum
from .rpca import WEIGHT_MODES, RpcaConfig, nnm_rpca, wsnm_rpca

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4


class ConfigError(WsnmError, ValueError):
    """Invalid configuration; the message names the offending key."""


def _bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _floats(value):
    """``"a,b,c"`` or ``"start:stop:step"`` (inclusive) to a list of floats."""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    text = str(value)
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        return frange(start, stop, step)
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(value):
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(t) for t in str(value).split(",") if t.strip()]


def _strings(value):
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [t.strip() for t in str(value).split(",") if t.strip()]


def _synthetic(value):
    if isinstance(value, dict):
        items = value
    else:
        items = {}
        for part in str(value).split(","):
            key, sep, val = part.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {part!r}")
            items[key.strip()] = val.strip()
    known = {"m": int, "pr": float, "pe": float, "mag": float}
    unknown = set(items) - set(known)
    if unknown:
        raise ValueError(f"unknown synthetic field(s) {sorted(unknown)}")
    missing = {"m", "pr", "pe"} - set(items)
    if missing:
        raise ValueError(f"missing synthetic field(s) {sorted(missing)}")
    return {k: known[k](v) for k, v in items.items()}


# name -> (type, default, help); None default means "unset / derived".
COMMON = {
    "config": (str, None, "JSON file with option values"),
    "seed": (int, 0, "seed for all random draws"),
    "threads": (int, 0, "worker threads (0 = all CPUs)"),
    "out": (str, None, "output directory"),
    "reproducible": (_bool, False, "write zero timings so reruns are byte-identical"),
}

SUMMARIES = {
    "denoise": "denoise a grayscale image with low-rank patch groups",
    "rpca": "split a matrix or frame sequence into low-rank and sparse parts",
    "sweep": "recovery success over a grid of rank and corruption fractions",
    "table": "recovery error for a list of ranks at fixed corruption",
    "prox": "apply the weighted Schatten p-norm prox to a matrix",
    "metrics": "compare two images or matrices",
}

COMMANDS = {
    "denoise": {
        "in": (str, None, "input PGM or WSNMF64 image"),
        "sigma": (float, None, "noise standard deviation (defaults to --add-noise)"),
        "add_noise": (float, None, "add Gaussian noise of this sigma to the input first"),
        "clean": (str, None, "clean reference image for PSNR"),
        "p": (float, None, "power (default chosen from sigma)"),
        "K": (int, None, "outer iterations"),
        "alpha": (float, 0.1, "residual feedback fraction"),
        "patch_size": (int, None, "patch side length"),
        "group_size": (int, None, "patches per group"),
        "search_window": (int, 30, "block matching window side"),
        "step": (int, 3, "stride between key patches"),
        "c": (float, None, "weight constant (default 2*sqrt(2)*sigma^2)"),
        "reestimate_noise": (_bool, True, "re-estimate the working sigma every iteration"),
        "gamma": (float, 1.0, "scale of the re-estimated sigma"),
        "center_groups": (_bool, False, "subtract the group mean before shrinkage"),
    },
    "rpca": {
        "in": (str, None, "input matrix (WSNMF64 or CSV)"),
        "synthetic": (_synthetic, None, "generate input: m=..,pr=..,pe=..[,mag=..]"),
        "frames": (str, None, "directory of PGM frames for background subtraction"),
        "method": (str, "wsnm", "wsnm or nnm"),
        "p": (float, 0.7, "power"),
        "C": (float, None, "weight constant (default 10**(1/p))"),
        "mu0": (float, None, "initial penalty (default 1/||Y||_2)"),
        "rho": (float, 1.2, "penalty growth factor"),
        "tol": (float, 1e-7, "relative residual tolerance"),
        "max_iters": (int, 500, "iteration cap"),
        "weight_mode": (str, WEIGHT_MODES[0], "|".join(WEIGHT_MODES)),
        "theta": (float, 3.0, "foreground threshold in robust sigmas"),
        "normalize": (_bool, True, "scale frames to [0, 1] before decomposition"),
    },
    "sweep": {
        "pr": (_floats, "0.05:0.40:0.05", "rank fractions (list or start:stop:step)"),
        "pe": (_floats, "0.05:0.40:0.05", "corruption fractions"),
        "repeats": (int, 2, "repeats per cell"),
        "methods": (_strings, "nnm,wsnm:0.7", "comma-separated methods"),
        "m": (int, 150, "matrix side"),
        "full_scale": (_bool, False, "m=300, 10 repeats, 0.01..0.40 step 0.01"),
        "rho": (float, 1.2, "penalty growth factor"),
        "tol": (float, 1e-7, "relative residual tolerance"),
        "max_iters": (int, 500, "iteration cap"),
    },
    "table": {
        "ranks": (_ints, "15,30,45,60,75,90,105,120,135,150", "absolute ranks"),
        "pe": (float, 0.05, "corruption fraction"),
        "repeats": (int, 3, "repeats per rank"),
        "methods": (_strings, "nnm,wsnm:0.7", "comma-separated methods"),
        "m": (int, 300, "matrix side"),
        "rho": (float, 1.2, "penalty growth factor"),
        "tol": (float, 1e-7, "relative residual tolerance"),
        "max_iters": (int, 500, "iteration cap"),
    },
    "prox": {
        "in": (str, None, "input matrix (WSNMF64 or CSV)"),
        "p": (float, 1.0, "power"),
        "weights": (_floats, None, "comma-separated weights, one per singular value"),
        "uniform": (float, None, "use this weight for every singular value"),
        "fidelity_scale": (float, 1.0, "a in a*||X - Y||^2"),
        "allow_unordered": (_bool, False, "accept weights that are not non-descending"),
    },
    "metrics": {
        "a": (str, None, "first image or matrix"),
        "b": (str, None, "second image or matrix (reference)"),
        "kind": (str, "psnr", "psnr, rel_err or similarity"),
    },
}

REQUIRED = {"denoise": ("in",), "prox": ("in",), "metrics": ("a", "b")}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="wsnm", description="Weighted Schatten p-norm tools.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, options in COMMANDS.items():
        p = sub.add_parser(command, help=SUMMARIES[command])
        for name, (kind, default, help_text) in {**COMMON, **options}.items():
            extra = "" if default is None else f" (default {default})"
            flag_kwargs = {"nargs": "?", "const": "true"} if kind is _bool else {}
            p.add_argument(_flag(name), dest=name, default=None, metavar="V",
                           help=help_text + extra, **flag_kwargs)
    return parser


def _convert(key, kind, value):
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {value!r} ({exc})") from None


def resolve_config(command, flags, file_values=None):
    """Merge defaults, config-file values and flags into one typed dict."""
    options = {**COMMON, **COMMANDS[command]}
    resolved = {}
    for key, (kind, default, _) in options.items():
        resolved[key] = None if default is None else _convert(key, kind, default)
    for source in (file_values or {}), flags:
        for raw_key, value in source.items():
            key = raw_key.replace("-", "_")
            if key not in options:
                raise ConfigError(f"unknown key {raw_key!r} for command {command!r}")
            if value is None:
                continue
            resolved[key] = _convert(key, options[key][0], value)
    for key in REQUIRED.get(command, ()):
        if resolved[key] is None:
            raise ConfigError(f"missing required {key!r} ({_flag(key)})")
    if resolved["out"] is None:
        raise ConfigError("missing required 'out' (--out)")
    if resolved["threads"] < 0:
        raise ConfigError("invalid value for 'threads': must be >= 0")
    if resolved["threads"] == 0:
        resolved["threads"] = os.cpu_count() or 1
    resolved.pop("config")
    return resolved


def parse_config(argv):
    """Parse ``argv`` into ``(command, resolved config dict)``."""
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    if command is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)
    file_values = {}
    if args.get("config"):
        file_values = _load_json(args["config"])
    return command, resolve_config(command, args, file_values)


def _load_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


# -- output helpers --------------------------------------------------------------

def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Run:
    """Collects outputs, timings and metrics for the manifest."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.out = cfg["out"]
        self.outputs = []
        self.timings = {}
        self.metrics = {}
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        self.outputs.append(name)
        return os.path.join(self.out, name)

    def timed(self, stage, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[stage] = 0.0 if self.cfg["reproducible"] else time.perf_counter() - start
        return result

    def write_manifest(self, status):
        config = dict(self.cfg)
        manifest = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "config": config,
            "timings": self.timings,
            "outputs": sorted(self.outputs),
            "metrics": self.metrics,
        }
        text = json.dumps(_json_safe(manifest), indent=2, sort_keys=True, allow_nan=False) + "\n"
        write_atomic(os.path.join(self.out, "manifest.json"), text)


def read_matrix(path):
    """WSNMF64 or comma-separated text."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"WSNMF64"):
        return read_image(path)
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def _read_img(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return read_image(path)


# -- commands ------------------------------------------------------------------------

def _checked(factory, **kwargs):
    try:
        return factory(**kwargs)
    except WsnmError as exc:
        raise ConfigError(str(exc)) from None


def cmd_denoise(run):
    cfg = run.cfg
    sigma = cfg["sigma"] if cfg["sigma"] is not None else cfg["add_noise"]
    if sigma is None:
        raise ConfigError("missing required 'sigma' (--sigma or --add-noise)")
    dcfg = _checked(
        DenoiseConfig, sigma_n=sigma, p=cfg["p"], K=cfg["K"], alpha=cfg["alpha"],
        patch_size=cfg["patch_size"], group_size=cfg["group_size"],
        search_window=cfg["search_window"], key_patch_step=cfg["step"], c=cfg["c"],
        reestimate_noise=cfg["reestimate_noise"], gamma=cfg["gamma"],
        center_groups=cfg["center_groups"], threads=cfg["threads"],
    )
    image = _read_img(cfg["in"])
    clean = _read_img(cfg["clean"]) if cfg["clean"] else None
    noisy = image
    if cfg["add_noise"] is not None:
        clean = image if clean is None else clean
        noisy = add_gaussian_noise(image, cfg["add_noise"], seed=cfg["seed"])
        write_pgm(run.path("noisy.pgm"), noisy)
        write_f64(run.path("noisy.f64"), noisy)
    run.metrics["resolved"] = {"p": dcfg.p, "K": dcfg.K, "patch_size": dcfg.patch_size,
                               "group_size": dcfg.group_size, "c": dcfg.c}
    result = run.timed("denoise", denoise_image, noisy, dcfg)
    write_pgm(run.path("denoised.pgm"), result)
    write_f64(run.path("denoised.f64"), result)
    if clean is not None:
        run.metrics["psnr_noisy"] = psnr(noisy, clean)
        run.metrics["psnr"] = psnr(result, clean)
    return True


def _rpca_solve(cfg, Y):
    if cfg["method"] == "nnm":
        return nnm_rpca(Y, mu0=cfg["mu0"], rho=cfg["rho"], tol=cfg["tol"], max_iters=cfg["max_iters"])
    if cfg["method"] != "wsnm":
        raise ConfigError(f"invalid value for 'method': {cfg['method']!r} (nnm or wsnm)")
    rcfg = _checked(RpcaConfig, p=cfg["p"], C=cfg["C"], mu0=cfg["mu0"], rho=cfg["rho"], tol=cfg["tol"],
                    max_iters=cfg["max_iters"], weight_mode=cfg["weight_mode"])
    return wsnm_rpca(Y, rcfg)


def cmd_rpca(run):
    cfg = run.cfg
    sources = [k for k in ("in", "synthetic", "frames") if cfg[k] is not None]
    if len(sources) != 1:
        raise ConfigError("exactly one of 'in', 'synthetic' or 'frames' is required")
    if not cfg["rho"] > 1:
        raise ConfigError(f"invalid value for 'rho': {cfg['rho']!r} (must exceed 1)")
    truth = None
    frame_shape = None
    if cfg["synthetic"] is not None:
        s = cfg["synthetic"]
        spec = SyntheticSpec(s["m"], s["pr"], s["pe"], s.get("mag", 50.0), seed=cfg["seed"])
        truth, _, Y = gen_lowrank_sparse(spec)
        write_f64(run.path("Y.f64"), Y)
    elif cfg["frames"] is not None:
        if not os.path.isdir(cfg["frames"]):
            raise FileNotFoundError(f"no such directory: {cfg['frames']}")
        names, frames = read_frames(cfg["frames"])
        frame_shape = frames[0].shape
        Y = video_to_matrix(frames)
        if cfg["normalize"]:
            Y = Y / 255.0
    else:
        Y = read_matrix(cfg["in"])

    result = run.timed("rpca", _rpca_solve, cfg, Y)
    write_f64(run.path("X.f64"), result.X)
    write_f64(run.path("E.f64"), result.E)
    lines = ["iter,residual,step,multiplier_norm"]
    for k, (r, s, z) in enumerate(zip(result.residual_history, result.step_history,
                                      result.multiplier_norm_history), start=1):
        lines.append(f"{k},{r:.9g},{s:.9g},{z:.9g}")
    write_atomic(run.path("residuals.csv"), "\n".join(lines) + "\n")
    run.metrics.update(iterations=result.iterations, converged=result.converged,
                       estimated_rank=result.estimated_rank,
                       final_residual=result.residual_history[-1])
    if truth is not None:
        run.metrics["rel_err"] = relative_error(result.X, truth)
        run.metrics["log_rel_err"] = log_relative_error(result.X, truth)
    if frame_shape is not None:
        h, w = frame_shape
        scale = 255.0 if cfg["normalize"] else 1.0
        masks = binarize_foreground(result.E, h, w, cfg["theta"])
        for name, bg, mask in zip(names, matrix_to_frames(result.X * scale, h, w), masks):
            stem = os.path.splitext(name)[0]
            write_pgm(run.path(f"background_{stem}.pgm"), bg)
            write_pgm(run.path(f"mask_{stem}.pgm"), mask * 255.0)
        run.metrics["foreground_fraction"] = float(np.mean(masks))
    return result.converged


def _sweep_summary(report):
    cells = []
    for p_r, p_e in report.cells():
        for method in report.methods():
            c = report.cell(p_r, p_e, method)
            cells.append({"p_r": p_r, "p_e": p_e, "method": method,
                          **(c if c else {"skipped": True})})
    return {"success_cells": {m: report.success_count(m) for m in report.methods()}, "cells": cells}


def _write_report(run, name, report):
    write_atomic(run.path(name), report.to_csv(timings=not run.cfg["reproducible"]))
    run.metrics.update(_sweep_summary(report))
    failures = [r for r in report.records if r.error]
    run.metrics["solver_failures"] = len(failures)
    return not failures


def cmd_sweep(run):
    cfg = run.cfg
    pr, pe, m, repeats = cfg["pr"], cfg["pe"], cfg["m"], cfg["repeats"]
    if cfg["full_scale"]:
        pr = pe = frange(0.01, 0.40, 0.01)
        m, repeats = 300, 10
    report = run.timed("sweep", run_phase_sweep, pr, pe, repeats, tuple(cfg["methods"]), m,
                       cfg["seed"], cfg["rho"], cfg["tol"], cfg["max_iters"], cfg["threads"])
    return _write_report(run, "sweep.csv", report)


def cmd_table(run):
    cfg = run.cfg
    report = run.timed("table", run_table, cfg["ranks"], cfg["pe"], tuple(cfg["methods"]),
                       cfg["repeats"], cfg["m"], cfg["seed"], cfg["rho"], cfg["tol"],
                       cfg["max_iters"], cfg["threads"])
    return _write_report(run, "table.csv", report)


def cmd_prox(run):
    cfg = run.cfg
    Y = read_matrix(cfg["in"])
    r = min(Y.shape)
    if (cfg["weights"] is None) == (cfg["uniform"] is None):
        raise ConfigError("exactly one of 'weights' or 'uniform' is required")
    weights = [cfg["uniform"]] * r if cfg["uniform"] is not None else cfg["weights"]
    if len(weights) != r:
        raise ConfigError(f"invalid value for 'weights': need {r} values, got {len(weights)}")
    if not 0 < cfg["p"] <= 1:
        raise ConfigError(f"invalid value for 'p': {cfg['p']!r} (must lie in (0, 1])")
    w = WeightVector.of(weights)
    factors, delta = wsnm_prox_spectrum(Y, w, cfg["p"], cfg["fidelity_scale"], cfg["allow_unordered"])
    X = (factors.U * delta) @ factors.V.T
    write_f64(run.path("prox.f64"), X)
    lines = ["index,weight,sigma_before,sigma_after"]
    for i, (wi, s, d) in enumerate(zip(w.weights, factors.s, delta)):
        lines.append(f"{i},{wi:.9g},{s:.9g},{d:.9g}")
    write_atomic(run.path("sigma_table.csv"), "\n".join(lines) + "\n")
    run.metrics["weights_certified"] = w.certified
    run.metrics["zeroed"] = int(np.count_nonzero(delta == 0))
    if cfg["p"] == 1 and np.all(w.weights == w.weights[0]):
        closed = svt(Y, w.weights[0] / (2.0 * cfg["fidelity_scale"]))
        run.metrics["max_abs_diff_vs_svt"] = float(np.max(np.abs(X - closed)))
    return True


def cmd_metrics(run):
    cfg = run.cfg
    kind = cfg["kind"]
    if kind == "psnr":
        run.metrics["psnr"] = psnr(_read_img(cfg["a"]), _read_img(cfg["b"]))
    elif kind == "rel_err":
        a, b = read_matrix(cfg["a"]), read_matrix(cfg["b"])
        run.metrics["rel_err"] = relative_error(a, b)
        run.metrics["log_rel_err"] = log_relative_error(a, b)
    elif kind == "similarity":
        run.metrics["similarity"] = foreground_similarity(read_pgm(cfg["a"]) > 127, read_pgm(cfg["b"]) > 127)
    else:
        raise ConfigError(f"invalid value for 'kind': {kind!r} (psnr, rel_err or similarity)")
    print(json.dumps(_json_safe(run.metrics)))
    return True


HANDLERS = {
    "denoise": cmd_denoise, "rpca": cmd_rpca, "sweep": cmd_sweep,
    "table": cmd_table, "prox": cmd_prox, "metrics": cmd_metrics,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    run = Run(command, cfg)
    try:
        ok = HANDLERS[command](run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WsnmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.write_manifest("failed")
        return EXIT_SOLVER
    run.write_manifest("ok" if ok else "solver_failure")
    return EXIT_OK if ok else EXIT_SOLVER
