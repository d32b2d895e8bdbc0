"""Command-line driver: ``nsflows <command> --config <path> [--out <dir>] [--heatmap]``.

Exit codes: 0 all checks pass, 1 a check or computation failed, 2 usage or
configuration error. ``NSFLOWS_THREADS`` overrides the configured thread
count; results never depend on it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .core_fields import Grid1D, SampledField, symmetric_grid
from .dual_transform import (chart_shift, dual_shift_solution, embed_initial_data, gaussian_phi,
                             weight_field, z_forward)
from .errors import DomainError, MalformedFileError, NSFlowsError
from .fieldio import load_field, store_field, write_ppm_heatmap
from .inverse_problem import RHOptions, reconstruct_potential
from .spectral_flows import SpectralKernel, evolve, hermiticity_defect
from .suites import DEFAULT_TOLERANCES, SUITES, ns_order, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_GRID = {
    "type": "object",
    "oneOf": [
        {"required": ["origin", "step", "count"]},
        {"required": ["half_width", "count"]},
    ],
    "properties": {
        "origin": {"type": "number"},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "half_width": {"type": "number", "exclusiveMinimum": 0},
        "count": {"type": "integer", "minimum": 2},
        "periodic": {"type": "boolean"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "suite": {"enum": list(SUITES) + ["all"]},
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "kernel": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "sample": {"type": "boolean"},
                "zero": {"type": "boolean"},
                "scale": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "evolve": {
            "type": "object",
            "required": ["subset", "index", "times"],
            "properties": {
                "subset": {"enum": ["shift", "dual"]},
                "index": {"enum": [1, 2, 3]},
                "times": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "rh": {
            "type": "object",
            "properties": {
                "method": {"enum": ["neumann", "direct"]},
                "max_iterations": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "contraction_guard": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "reconstruct": {
            "type": "object",
            "required": ["x1", "x2"],
            "properties": {"x1": _GRID, "x2": _GRID, "ns_check": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "transform": {
            "type": "object",
            "required": ["pipeline"],
            "properties": {
                "pipeline": {"enum": ["weight", "chart", "dual_shift", "embed"]},
                "input": {"type": "string"},
                "t01": {"type": "number"},
                "t02": {"type": "number"},
                "points": {"type": "array",
                           "items": {"type": "array", "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2}},
                "x1": _GRID, "x2": _GRID, "z1": _GRID, "z2": _GRID,
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    pass


def sample_kernel_path():
    return resources.files("nsflows") / "data" / "sample_kernel.nsf"


def load_sample_kernel() -> SpectralKernel:
    with resources.as_file(sample_kernel_path()) as p:
        return SpectralKernel.from_field(load_field(p))


def _grid(spec: dict) -> Grid1D:
    periodic = spec.get("periodic", True)
    if "half_width" in spec:
        return symmetric_grid(spec["half_width"], spec["count"], periodic)
    return Grid1D(spec["origin"], spec["step"], spec["count"], periodic)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def load_config(path) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config schema violation at {loc}: {exc.message}") from exc
    unknown = set(cfg.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise UsageError(f"unknown tolerance keys: {sorted(unknown)}")
    digest = hashlib.sha256(_canonical(cfg).encode()).hexdigest()
    return cfg, digest


def _threads(cfg: dict) -> int:
    env = os.environ.get("NSFLOWS_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"NSFLOWS_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise UsageError("NSFLOWS_THREADS must be >= 1")
        return n
    return int(cfg.get("threads", 1))


def _kernel(cfg: dict) -> SpectralKernel:
    spec = cfg.get("kernel", {"sample": True})
    if "path" in spec:
        try:
            k = SpectralKernel.from_field(load_field(spec["path"]))
        except (OSError, MalformedFileError) as exc:
            raise UsageError(f"cannot load kernel {spec['path']}: {exc}") from exc
    else:
        k = load_sample_kernel()
    if spec.get("zero"):
        k = SpectralKernel(k.grid, np.zeros_like(k.r))
    if "scale" in spec:
        k = k.scaled(spec["scale"])
    return k


def _rh(cfg: dict) -> RHOptions:
    return RHOptions(**cfg.get("rh", {}))


def _report(command: str, digest: str, body: dict) -> dict:
    rep = {"tool": "nsflows", "version": __version__, "command": command, "config_sha256": digest}
    rep.update(body)
    return rep


def _write_json(out: Path, name: str, obj) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _store(out: Path, name: str, fld: SampledField, heatmap: bool) -> list:
    out.mkdir(parents=True, exist_ok=True)
    store_field(fld, out / f"{name}.nsf")
    files = [f"{name}.nsf"]
    if heatmap and fld.rank == 2:
        write_ppm_heatmap(fld, out / f"{name}.ppm", "re" if fld.real else "abs")
        files.append(f"{name}.ppm")
    return files


def cmd_verify(cfg, digest, out: Path, heatmap: bool) -> int:
    suite = cfg.get("suite", "all")
    kernel = _kernel(cfg) if ("kernel" in cfg or suite in ("flows", "all")) else None
    results = run_suite(suite, cfg.get("tolerances"), cfg.get("seed", 0), kernel, _threads(cfg))
    checks = {s: [c.to_dict() for c in cs] for s, cs in results.items()}
    ok = all(c["pass"] for cs in checks.values() for c in cs)
    _write_json(out, "report.json", _report("verify", digest,
                                            {"suite": suite, "checks": checks, "pass": ok}))
    for s, cs in checks.items():
        for c in cs:
            print(f"{'PASS' if c['pass'] else 'FAIL'} [{s}] {c['name']} = {c['value']:.3e} "
                  f"({'<=' if c['kind'] == 'max' else '>='} {c['tolerance']:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_evolve(cfg, digest, out: Path, heatmap: bool) -> int:
    if "evolve" not in cfg:
        raise UsageError("config needs an 'evolve' block")
    ev = cfg["evolve"]
    kernel = _kernel(cfg)
    entries = []
    for i, t in enumerate(ev["times"]):
        k = evolve(kernel, ev["subset"], ev["index"], t)
        files = _store(out, f"kernel_{i:03d}", k.to_field(), heatmap)
        entries.append({"t": t, "files": files, "hermiticity_defect": hermiticity_defect(k),
                        "warnings": list(k.warnings)})
    body = {"subset": ev["subset"], "index": ev["index"], "outputs": entries}
    times = ev["times"]
    if len(times) >= 2:
        a = evolve(evolve(kernel, ev["subset"], ev["index"], times[0]),
                   ev["subset"], ev["index"], times[1])
        b = evolve(kernel, ev["subset"], ev["index"], times[0] + times[1])
        peak = kernel.max_abs() or 1.0
        body["group_law_defect"] = float(np.max(np.abs(a.r - b.r)) / peak)
    _write_json(out, "report.json", _report("evolve", digest, body))
    return EXIT_OK


def cmd_reconstruct(cfg, digest, out: Path, heatmap: bool) -> int:
    if "reconstruct" not in cfg:
        raise UsageError("config needs a 'reconstruct' block")
    rc = cfg["reconstruct"]
    kernel = _kernel(cfg)
    threads = _threads(cfg)
    try:
        rec = reconstruct_potential(kernel, _grid(rc["x1"]), _grid(rc["x2"]), _rh(cfg), threads)
    except NSFlowsError as exc:
        _write_json(out, "report.json", _report("reconstruct", digest,
                                                {"pass": False, "error": str(exc)}))
        print(f"FAIL reconstruct: {exc}", file=sys.stderr)
        return EXIT_FAIL
    files = _store(out, "u", rec.u, heatmap) + _store(out, "nu1", rec.nu1, False)
    body = {"files": files, "solver": rec.report(), "pass": True}
    if rc.get("ns_check") and kernel.max_abs() > 0:
        order = ns_order(kernel, threads)
        tol = cfg.get("tolerances", {}).get("min_order", DEFAULT_TOLERANCES["min_order"])
        body["ns_residual_order"] = order
        body["pass"] = bool(order >= tol)
    _write_json(out, "report.json", _report("reconstruct", digest, body))
    return EXIT_OK if body["pass"] else EXIT_FAIL


def _input_field(spec: dict, default=None) -> SampledField:
    if "input" in spec:
        try:
            return load_field(spec["input"])
        except (OSError, MalformedFileError) as exc:
            raise UsageError(f"cannot load input {spec['input']}: {exc}") from exc
    if default is None:
        raise UsageError("transform needs an 'input' field path")
    return default()


def cmd_transform(cfg, digest, out: Path, heatmap: bool) -> int:
    if "transform" not in cfg:
        raise UsageError("config needs a 'transform' block")
    tf = cfg["transform"]
    pipe = tf["pipeline"]
    body = {"pipeline": pipe}
    try:
        if pipe == "weight":
            body["files"] = _store(out, "w", weight_field(_input_field(tf)), heatmap)
        elif pipe == "chart":
            pts = np.array(tf.get("points", []), dtype=float).reshape(-1, 2)
            body["z"] = z_forward(pts).tolist()
            body["shifted"] = chart_shift(pts, tf.get("t01", 0.0), tf.get("t02", 0.0)).tolist()
        elif pipe == "dual_shift":
            w0 = _input_field(tf)
            target = (_grid(tf["x1"]), _grid(tf["x2"])) if "x1" in tf and "x2" in tf else None
            t01, t02 = tf.get("t01", 0.0), tf.get("t02", 0.0)
            w = dual_shift_solution(w0, t01, t02, target)
            body["files"] = _store(out, "w_shifted", w, heatmap)
            if target is None:
                ident = dual_shift_solution(w0, 0.0, 0.0)
                body["identity_defect"] = float(np.max(np.abs(ident.values - w0.values)))
        elif pipe == "embed":
            if "x1" not in tf or "x2" not in tf:
                raise UsageError("embed needs x1 and x2 grids")

            def default():
                z1 = _grid(tf.get("z1", {"half_width": 4.0, "count": 128}))
                z2 = _grid(tf.get("z2", {"origin": -1.5, "step": 0.02, "count": 101,
                                         "periodic": False}))
                return gaussian_phi(z1, z2)

            u = embed_initial_data(_input_field(tf, default), _grid(tf["x1"]), _grid(tf["x2"]))
            body["files"] = _store(out, "u_embedded", u, heatmap)
    except DomainError as exc:
        body.update({"pass": False, "error": str(exc), "offending": exc.offending})
        _write_json(out, "report.json", _report("transform", digest, body))
        print(f"FAIL transform: {exc}", file=sys.stderr)
        return EXIT_FAIL
    body["pass"] = True
    _write_json(out, "report.json", _report("transform", digest, body))
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "evolve": cmd_evolve,
    "reconstruct": cmd_reconstruct,
    "transform": cmd_transform,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsflows", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="nsflows_out", help="output directory")
    p.add_argument("--heatmap", action="store_true", help="also write PPM heatmaps of 2-D fields")
    p.add_argument("--version", action="version", version=f"nsflows {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, digest = load_config(args.config)
        return COMMANDS[args.command](cfg, digest, Path(args.out), args.heatmap)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NSFlowsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
