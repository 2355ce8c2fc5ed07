"""``pinc`` command line: train, reconstruct, eval, ablate, verify, add-noise.

Exit codes: 0 success, 1 failed verification, 2 bad input or configuration,
3 numeric fault during training or extraction.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io as _stdio
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import io as pio
from .diffcore import ConfigError, UsageError
from .extract import TriangleMesh, de_normalize, evaluate_grid, marching_cubes
from .fields import PExponent, sample_fields
from .loss import CurlTarget, Formulation, LossMode, LossWeights, TrainingFault
from .metrics import (
    distance_report,
    field_mse,
    mesh_normal_consistency,
    normal_consistency,
    sample_mesh_surface,
)
from .network import EIKONAL_OUT_DIM, PINC_OUT_DIM, MLPConfig, Params, forward, load_checkpoint
from .sampler import Affine, PointCloud, add_noise, make_rng, normalize
from .trainer import TrainConfig, load_state, train

log = logging.getLogger("pinc")

RUN_DIR_ENV = "PINC_RUN_DIR"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
METRICS_HEADER = ["shape", "metric", "value", "frame", "seed"]


class InputError(Exception):
    """Raised for anything the user can fix: paths, formats, config keys."""


# --- configuration ---------------------------------------------------------------

def _bool(text: str) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, dict[str, type]] = {
    "data": {"input": str},
    "network": {"depth": int, "width": int, "skip_layer": int, "softplus_beta": float},
    "train": {
        "iterations": int, "lr0": float, "decay": float, "decay_every": int, "seed": int,
        "batch": int, "n_global": int, "eta": float, "eps_div": float, "log_every": int,
        "checkpoint_every": int, "init": str, "init_radius": float, "p": str,
    },
    "loss": {
        "lambda1": float, "lambda2": float, "lambda3": float, "lambda4": float,
        "epsilon": float, "eta_baseline": float, "curl_target": str, "area_term": _bool,
        "formulation": str,
    },
    "extract": {"resolution": int},
    "metrics": {"samples": int, "hausdorff_sum": _bool},
}


def default_values(full_scale: bool = False) -> dict[str, dict]:
    net = MLPConfig.full_scale() if full_scale else MLPConfig()
    tr, w, mode = TrainConfig(), LossWeights(), LossMode()
    values = {
        "data": {"input": ""},
        "network": {"depth": net.depth, "width": net.width, "skip_layer": net.skip_layer,
                    "softplus_beta": net.softplus_beta},
        "train": {k: getattr(tr, k) for k in SCHEMA["train"] if k != "p"} | {"p": str(tr.p)},
        "loss": {k: getattr(w, k) for k in ("lambda1", "lambda2", "lambda3", "lambda4", "epsilon", "eta_baseline")}
        | {"curl_target": mode.curl_target.value, "area_term": mode.area_term,
           "formulation": mode.formulation.value},
        "extract": {"resolution": 512 if full_scale else 128},
        "metrics": {"samples": 100_000, "hausdorff_sum": False},
    }
    if full_scale:
        values["train"]["batch"] = 16384
    return values


def read_config_file(path) -> dict[str, dict]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}".replace("\n", " ")) from None
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise InputError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise InputError(f"{path}: unknown key '{key}' in [{section}]")
            try:
                out.setdefault(section, {})[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise InputError(f"{path}: bad value for {section}.{key}: {exc}") from None
    return out


def merge(base: dict, *layers: dict) -> dict:
    merged = {s: dict(v) for s, v in base.items()}
    for layer in layers:
        for section, kv in layer.items():
            for key, value in kv.items():
                if value is not None:
                    merged[section][key] = value
    return merged


def config_text(values: dict) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, kv in values.items():
        parser[section] = {k: str(v) for k, v in kv.items()}
    buf = _stdio.StringIO()
    parser.write(buf)
    return buf.getvalue()


@dataclass
class RunConfig:
    input: str
    net: MLPConfig
    train: TrainConfig
    resolution: int
    samples: int
    hausdorff_sum: bool
    values: dict

    @classmethod
    def from_values(cls, values: dict) -> "RunConfig":
        loss = values["loss"]
        try:
            mode = LossMode(CurlTarget(loss["curl_target"]), bool(loss["area_term"]), Formulation(loss["formulation"]))
            weights = LossWeights(**{k: float(loss[k]) for k in
                                     ("lambda1", "lambda2", "lambda3", "lambda4", "epsilon", "eta_baseline")})
            out_dim = EIKONAL_OUT_DIM if mode.formulation is Formulation.EIKONAL_SPLIT else PINC_OUT_DIM
            net = MLPConfig(out_dim=out_dim, **values["network"])
            tr = dict(values["train"])
            p = PExponent.parse(tr.pop("p"))
            train_cfg = TrainConfig(weights=weights, mode=mode, p=p, **tr)
        except (ValueError, ConfigError) as exc:
            raise InputError(f"invalid configuration: {exc}") from None
        if values["extract"]["resolution"] < 2:
            raise InputError("extract.resolution must be >= 2")
        return cls(values["data"]["input"], net, train_cfg, int(values["extract"]["resolution"]),
                   int(values["metrics"]["samples"]), bool(values["metrics"]["hausdorff_sum"]), values)


def cli_overrides(args) -> dict:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    mode = g("mode")
    return {
        "data": {"input": g("input")},
        "network": {"depth": g("depth"), "width": g("width"),
                    "skip_layer": None if g("depth") is None else g("depth") // 2},
        "train": {"iterations": g("iterations"), "seed": g("seed"), "p": g("p"), "batch": g("batch"),
                  "checkpoint_every": g("checkpoint_every"), "lr0": g("lr")},
        "loss": {"curl_target": g("curl_target"),
                 "area_term": False if g("no_area") else None,
                 "formulation": None if mode is None else mode.replace("-", "_")},
        "extract": {"resolution": g("resolution")},
        "metrics": {"samples": g("samples"), "hausdorff_sum": True if g("hausdorff_both") else None},
    }


def resolve_config(args) -> RunConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    values = merge(default_values(getattr(args, "full_scale", False)), file_values, cli_overrides(args))
    return RunConfig.from_values(values)


def run_dir_for(args, fallback: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(RUN_DIR_ENV) or fallback)


# --- shared steps ------------------------------------------------------------------

def load_cloud(path) -> tuple[np.ndarray, np.ndarray | None]:
    if not path:
        raise InputError("no input point cloud given")
    if not Path(path).is_file():
        raise InputError(f"input file not found: {path}")
    try:
        pts, normals = pio.read_points(path)
    except pio.ParseError as exc:
        raise InputError(str(exc)) from None
    if len(pts) == 0:
        raise InputError(f"{path}: no points")
    if not np.isfinite(pts).all():
        raise InputError(f"{path}: non-finite coordinates")
    return pts, normals


def _load_checkpoint(path) -> Params:
    if not Path(path).is_file():
        raise InputError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except (ConfigError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _load_affine(path) -> Affine | None:
    if path is None or not Path(path).is_file():
        return None
    try:
        return Affine.from_dict(json.loads(Path(path).read_text()))
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: bad normalization record ({exc})") from None


def extract_mesh(params: Params, resolution: int) -> TriangleMesh:
    return marching_cubes(evaluate_grid(params, resolution))


def write_mesh(path: Path, mesh: TriangleMesh, header: str) -> None:
    if path.suffix.lower() == ".ply":
        pio.write_ply_mesh(path, mesh.vertices, mesh.triangles)
    else:
        pio.write_obj(path, mesh.vertices, mesh.triangles, header=header)


def gradient_field(params: Params, points: np.ndarray) -> np.ndarray:
    """G for the PINC heads, the normalised auxiliary output for the eikonal split."""
    x = torch.from_numpy(np.ascontiguousarray(points, dtype=np.float64))
    with torch.no_grad():
        if params.cfg.out_dim == EIKONAL_OUT_DIM:
            h = forward(params, x).outputs[:, 1:4]
            return (h / torch.linalg.vector_norm(h, dim=-1, keepdim=True).clamp_min(1e-12)).numpy()
        return sample_fields(params, x).G.numpy()


def metric_rows(shape: str, mesh: TriangleMesh, ref_points: np.ndarray, ref_normals, frame: str, seed: int,
                samples: int, hausdorff_sum: bool, field_normals=None, ref_is_mesh_samples=False) -> list[list]:
    """Distance and NC rows for one evaluated shape."""
    rows = []
    if len(mesh) == 0:
        for name in ("d_C", "d_H"):
            rows.append([shape, name, "nan", frame, seed])
    else:
        pts, faces = sample_mesh_surface(mesh, samples, make_rng(seed, "eval-samples"), with_faces=True)
        rep = distance_report(pts, ref_points)
        rows += [
            [shape, "d_C", repr(rep.d_C), frame, seed],
            [shape, "d_C_mesh_to_ref", repr(rep.d_C_one_sided_xy), frame, seed],
            [shape, "d_C_ref_to_mesh", repr(rep.d_C_one_sided_yx), frame, seed],
            [shape, "d_H", repr(rep.d_H), frame, seed],
        ]
        if hausdorff_sum:
            rows.append([shape, "d_H_sum", repr(rep.d_H_sum), frame, seed])
    if ref_normals is None:
        rows.append([shape, "normal_consistency", "absent", frame, seed])
    elif field_normals is not None:
        rows.append([shape, "normal_consistency", repr(normal_consistency(field_normals, ref_normals)), frame, seed])
    elif len(mesh):
        nc = mesh_normal_consistency(mesh, ref_points, ref_normals, pts, faces)
        rows.append([shape, "normal_consistency", repr(nc), frame, seed])
    else:
        rows.append([shape, "normal_consistency", "nan", frame, seed])
    return rows


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    pio.atomic_write_text(path, buf.getvalue())


def _read_log_rows(path: Path, before: int) -> list[str]:
    if not path.is_file():
        return []
    lines = path.read_text().splitlines()[1:]
    return [ln for ln in lines if ln and int(ln.split(",", 1)[0]) < before]


# --- commands ----------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = resolve_config(args)
    raw, normals = load_cloud(cfg.input)
    run_dir = run_dir_for(args, "pinc_run")
    run_dir.mkdir(parents=True, exist_ok=True)
    cloud, affine = normalize(raw, normals)
    pio.atomic_write_text(run_dir / "config.ini", config_text(cfg.values))
    pio.atomic_write_text(run_dir / "normalization.json", json.dumps(affine.to_dict(), indent=2) + "\n")

    resume = None
    if args.resume:
        if not (run_dir / "checkpoint.pinc").is_file() or not (run_dir / "adam_state.npz").is_file():
            raise InputError(f"nothing to resume in {run_dir}")
        resume = load_state(run_dir, cfg.train)
        if resume.params.cfg != cfg.net:
            raise InputError("checkpoint network does not match the configuration")
        resume.log_rows = _read_log_rows(run_dir / "loss.csv", resume.iteration)

    def progress(it, breakdown):
        if args.verbose and it % max(cfg.train.log_every, 1) == 0:
            print(f"iter {it} total {float(breakdown.total.detach()):.6e}", file=sys.stderr)

    result = train(cloud, cfg.net, cfg.train, run_dir=run_dir, resume=resume, progress=progress)
    if args.no_mesh:
        return EXIT_OK
    mesh = extract_mesh(result.params, cfg.resolution)
    mesh = de_normalize(mesh, affine)
    write_mesh(run_dir / "mesh.obj", mesh, f"pinc mesh\nresolution {cfg.resolution}\nframe input")
    field = gradient_field(result.params, cloud.points) if normals is not None else None
    rows = metric_rows(Path(cfg.input).stem, mesh, raw, normals, "input", cfg.train.seed,
                       cfg.samples, cfg.hausdorff_sum, field_normals=field)
    write_csv(run_dir / "metrics.csv", METRICS_HEADER, rows)
    print(run_dir)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    params = _load_checkpoint(args.checkpoint)
    norm_path = Path(args.normalization) if args.normalization else Path(args.checkpoint).parent / "normalization.json"
    affine = None if args.no_denormalize else _load_affine(norm_path)
    if args.normalization and affine is None and not args.no_denormalize:
        raise InputError(f"normalization record not found: {args.normalization}")
    mesh = extract_mesh(params, args.resolution)
    frame = "normalized"
    if affine is not None:
        mesh, frame = de_normalize(mesh, affine), "input"
    out = Path(args.out) if args.out else Path(os.environ.get(RUN_DIR_ENV) or Path(args.checkpoint).parent) / "mesh.obj"
    write_mesh(out, mesh, f"pinc mesh\nresolution {args.resolution}\nframe {frame}")
    print(f"{out}: {len(mesh.vertices)} vertices, {len(mesh)} triangles")
    return EXIT_OK


def _reference(path, samples: int, seed: int):
    """Reference points (+ normals): surface samples of a mesh, or the cloud itself."""
    if not Path(path).is_file():
        raise InputError(f"reference not found: {path}")
    suffix = Path(path).suffix.lower()
    try:
        if suffix in (".obj", ".ply"):
            verts, faces = pio.read_mesh(path)
            if len(faces):
                mesh = TriangleMesh(verts, faces)
                pts, tri = sample_mesh_surface(mesh, samples, make_rng(seed, "eval-samples"), with_faces=True)
                from .metrics import face_normals

                return pts, face_normals(mesh)[tri]
        return load_cloud(path)
    except pio.ParseError as exc:
        raise InputError(str(exc)) from None


def cmd_eval(args) -> int:
    samples = args.samples
    ref_pts, ref_normals = _reference(args.reference, samples, args.seed)
    src = Path(args.source)
    if not src.is_file():
        raise InputError(f"source not found: {src}")
    field = None
    if src.suffix.lower() == ".pinc":
        params = _load_checkpoint(src)
        affine = _load_affine(Path(args.normalization) if args.normalization else src.parent / "normalization.json")
        mesh = extract_mesh(params, args.resolution)
        frame = "normalized"
        local_ref = ref_pts
        if affine is not None:
            mesh, frame, local_ref = de_normalize(mesh, affine), "input", affine.apply(ref_pts)
        if ref_normals is not None:
            field = gradient_field(params, local_ref)
    else:
        try:
            verts, faces = pio.read_mesh(src)
        except pio.ParseError as exc:
            raise InputError(str(exc)) from None
        mesh, frame = TriangleMesh(verts, faces), "input"
    rows = metric_rows(src.stem, mesh, ref_pts, ref_normals, frame, args.seed, samples,
                       args.hausdorff_both, field_normals=field)
    out = Path(args.out) if args.out else run_dir_for(args, ".") / "metrics.csv"
    write_csv(out, METRICS_HEADER, rows)
    for r in rows:
        print(",".join(map(str, r)))
    return EXIT_OK


SWEEPS = {
    "p": lambda v: ("p", str(PExponent.parse(v))),
    "curl": lambda v: ("curl_target", CurlTarget(v).value),
    "area": lambda v: ("area_term", _bool(v)),
}
ABLATION_HEADER = ["variant", "parameter", "value", "seed", "d_C", "d_H", "normal_consistency", "mse_to_p_inf"]


def parse_sweep(text: str) -> tuple[str, list]:
    name, _, vals = text.partition("=")
    if name not in SWEEPS or not vals:
        raise InputError(f"sweep must look like p=2,10,100 | curl=off,on_G,on_G_tilde | area=on,off, got {text!r}")
    try:
        return name, [SWEEPS[name](v.strip()) for v in vals.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad sweep value: {exc}") from None


def cmd_ablate(args) -> int:
    base = resolve_config(args)
    raw, normals = load_cloud(base.input)
    cloud, _ = normalize(raw, normals)
    name, variants = parse_sweep(args.sweep)
    run_dir = run_dir_for(args, "pinc_ablation")
    run_dir.mkdir(parents=True, exist_ok=True)
    pio.atomic_write_text(run_dir / "config.ini", config_text(base.values))

    def run(key, value) -> Params:
        section = "train" if key == "p" else "loss"
        cfg = RunConfig.from_values(merge(base.values, {section: {key: value}}))
        label = f"{name}_{str(value).lower()}"
        sub = run_dir / label
        pio.atomic_write_text(sub / "config.ini", config_text(cfg.values))
        return train(cloud, cfg.net, cfg.train, run_dir=sub).params

    trained = [(key, value, run(key, value)) for key, value in variants]
    reference = None
    if name == "p":
        reference = next((prm for _, v, prm in trained if v == "inf"), None)
        if reference is None:
            reference = run("p", "inf")
    rows = []
    for key, value, params in trained:
        mesh = extract_mesh(params, base.resolution)
        if len(mesh):
            pts = sample_mesh_surface(mesh, base.samples, make_rng(base.train.seed, "eval-samples"))
            rep = distance_report(pts, cloud.points)
            d_c, d_h = repr(rep.d_C), repr(rep.d_H)
        else:
            d_c = d_h = "nan"
        nc = repr(normal_consistency(gradient_field(params, cloud.points), cloud.normals)) if normals is not None else "absent"
        mse = repr(field_mse(params, reference)) if reference is not None else ""
        rows.append([f"{name}_{str(value).lower()}", key, value, base.train.seed, d_c, d_h, nc, mse])
    write_csv(run_dir / "ablation.csv", ABLATION_HEADER, rows)
    for r in rows:
        print(",".join(map(str, r)))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import harness_rows, run_checks

    checks = run_checks(args.seed)
    for c in checks:
        print(c.line())
    if args.out:
        out = Path(args.out)
        write_csv(out / "harness.csv", ["n", "splitting_energy", "curl_energy"],
                  [[n, repr(s), repr(c)] for n, s, c in harness_rows()])
        write_csv(out / "verify.csv", ["check", "value", "target", "tolerance", "passed"],
                  [[c.name, repr(c.value), repr(c.target), repr(c.tolerance), c.passed] for c in checks])
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_add_noise(args) -> int:
    if args.sigma < 0:
        raise InputError("sigma must be non-negative")
    raw, normals = load_cloud(args.input)
    sigma = args.sigma
    if args.frame == "normalized":
        sigma *= normalize(raw)[1].scale
    noisy = add_noise(PointCloud(raw, normals), sigma, make_rng(args.seed, "add-noise"))
    pio.write_xyz(args.output, noisy.points, noisy.normals)
    print(f"{args.output}: {len(noisy)} points, sigma {sigma:g} (input units)")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------

def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [data] [network] [train] [loss] [extract] [metrics] sections")
    p.add_argument("--out", help=f"run directory (default: ${RUN_DIR_ENV} or a local folder)")
    p.add_argument("--full-scale", action="store_true", help="8x512 network, 16384-point batches, 512^3 grid")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--depth", type=int, help="hidden layers; the skip connection moves to depth // 2")
    p.add_argument("--width", type=int)
    p.add_argument("--p", help="p-Poisson exponent, a number >= 2 or 'inf'")
    p.add_argument("--curl-target", choices=[c.value for c in CurlTarget])
    p.add_argument("--no-area", action="store_true", help="drop the minimal-area term")
    p.add_argument("--mode", choices=["pinc", "eikonal-split"])
    p.add_argument("--resolution", type=int, help="marching cubes grid resolution")
    p.add_argument("--samples", type=int, help="surface samples for distance metrics")
    p.add_argument("--hausdorff-both", action="store_true", help="also report the summed Hausdorff variant")
    p.add_argument("--checkpoint-every", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinc", description="Implicit surface reconstruction from point clouds.")
    parser.add_argument("--threads", type=int, default=None, help="torch threads (1 gives bitwise reproducibility)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a network to a point cloud")
    p.add_argument("input", nargs="?", help="point cloud (.xyz, .ply, .obj); may come from the config")
    _add_training_flags(p)
    p.add_argument("--resume", action="store_true", help="continue from the run directory's checkpoint")
    p.add_argument("--no-mesh", action="store_true", help="skip mesh extraction and metrics")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="extract the zero level set of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--out", help="mesh path (.obj or .ply)")
    p.add_argument("--normalization", help="affine record (default: normalization.json next to the checkpoint)")
    p.add_argument("--no-denormalize", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="distance and normal metrics against a reference")
    p.add_argument("source", help="mesh (.obj/.ply) or checkpoint (.pinc)")
    p.add_argument("reference", help="reference point cloud or mesh")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--normalization")
    p.add_argument("--hausdorff-both", action="store_true")
    p.add_argument("--out", help="metrics CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train one variant per sweep value with a shared seed")
    p.add_argument("input", nargs="?")
    p.add_argument("--sweep", required=True, help="p=2,10,100,inf | curl=off,on_G,on_G_tilde | area=on,off")
    _add_training_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("verify", help="run the built-in oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for harness.csv and verify.csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("add-noise", help="perturb a point cloud with Gaussian noise")
    p.add_argument("input")
    p.add_argument("output", help="output .xyz")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame", choices=["normalized", "input"], default="normalized",
                   help="units of sigma: the unit-sphere frame or the file's own")
    p.set_defaults(func=cmd_add_noise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    torch.set_num_threads(args.threads or os.cpu_count() or 1)
    try:
        return args.func(args)
    except (InputError, UsageError, pio.ParseError, ConfigError) as exc:
        print(f"pinc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TrainingFault, FloatingPointError) as exc:
        print(f"pinc: numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
