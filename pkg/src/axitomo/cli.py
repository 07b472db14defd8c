"""Command-line pipeline: ``axitomo <command> --config run.json [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io, sim
from .config import ConfigError, RunConfig, load_config
from .export import central_section, profile, row_section, to_uint16
from .io import FormatError
from .projector import build_system_matrix, matvec
from .solver import reconstruct, tv_reconstruct

def _check_grid(cfg: RunConfig, meta: dict, what: str) -> None:
    grid = meta.get("grid")
    if grid is not None and grid != cfg.grid.to_dict():
        raise ValueError(f"{what} was produced for grid {grid}, config has {cfg.grid.to_dict()}")


def _load_matrix(cfg: RunConfig, override):
    path = cfg.path("matrix", override)
    A, meta = io.read_matrix(path)
    if A.shape != (cfg.geometry.n_rays, cfg.grid.n_cols):
        raise ValueError(f"matrix {path} has shape {A.shape}, config expects "
                         f"({cfg.geometry.n_rays}, {cfg.grid.n_cols})")
    return A


def _load_volume(cfg: RunConfig, path: Path) -> np.ndarray:
    u, meta = io.read_array(path)
    _check_grid(cfg, meta, str(path))
    if u.shape != cfg.grid.shape:
        raise ValueError(f"volume {path} has shape {u.shape}, expected {cfg.grid.shape}")
    return u


def cmd_build_matrix(cfg: RunConfig, args) -> None:
    t0 = time.perf_counter()
    A = build_system_matrix(cfg.geometry, cfg.grid, symmetry=not args.no_symmetry)
    elapsed = time.perf_counter() - t0
    out = cfg.path("matrix", args.out)
    io.write_matrix(out, A, meta=cfg.provenance())
    print(f"wrote {out}: {A.n_rows} rows, {A.n_cols} cols, nnz {A.nnz}, built in {elapsed:.2f} s")


def cmd_phantom(cfg: RunConfig, args) -> None:
    u = sim.rasterize(cfg.phantom, cfg.grid)
    out = cfg.path("phantom", args.out)
    io.write_array(out, u, dict(cfg.provenance(), kind="volume", source="phantom",
                                phantom=cfg.phantom.to_list()))
    print(f"wrote {out}: volume {u.shape}")


def cmd_simulate(cfg: RunConfig, args) -> None:
    A = _load_matrix(cfg, args.matrix)
    u = _load_volume(cfg, cfg.path("phantom", args.phantom))
    g = sim.simulate(A, u, cfg.noise.noise_variance, cfg.noise.seed)
    out = cfg.path("projection", args.out)
    io.write_array(out, sim.data_to_image(g, cfg.geometry),
                   dict(cfg.provenance(), kind="projection",
                        noise_variance=cfg.noise.noise_variance, seed=cfg.noise.seed))
    print(f"wrote {out}: projection ({2 * cfg.geometry.p}, {2 * cfg.geometry.q})")


def cmd_reconstruct(cfg: RunConfig, args) -> None:
    A = _load_matrix(cfg, args.matrix)
    proj_path = cfg.path("projection", args.projection)
    img, meta = io.read_array(proj_path)
    if img.size != A.n_rows:
        raise ValueError(f"projection {proj_path} has {img.size} values, matrix has {A.n_rows} rows")
    g = sim.image_to_data(img)
    params = cfg.solver
    out = cfg.path("volume", args.out)
    diag_path = cfg.path("diagnostics", args.diagnostics) if (args.diagnostics or "diagnostics" in cfg.paths) \
        else out.with_name(out.name + ".csv")
    t0 = time.perf_counter()
    if args.method == "tv":
        u = tv_reconstruct(A, g, cfg.grid.shape, params.lambda_tv, params.tv_iter, power_iters=params.power_iters)
        res = matvec(A, sim.volume_to_vector(u)) - g
        rows = [[0, float(0.5 * res @ res), float(np.linalg.norm(res)), "", time.perf_counter() - t0]]
        header = ["iteration", "objective", "data_residual", "frame_residual", "elapsed"]
    else:
        u, diag = reconstruct(A, g, cfg.grid.shape, params)
        header = ["iteration", "objective", "data_residual", "frame_residual", "nnz", "rel_change", "elapsed"]
        rows = [[rec[h] for h in header] for rec in diag.records]
        io.write_bank(out.with_name(out.name + ".bank.json"), diag.bank)
    io.write_array(out, u, dict(cfg.provenance(), kind="volume", source="reconstruction",
                                method=args.method, solver=params.to_dict(),
                                projection_seed=meta.get("seed"),
                                noise_variance=meta.get("noise_variance")))
    io.write_csv(diag_path, header, rows)
    print(f"wrote {out} ({args.method}, {len(rows)} log rows) and {diag_path}")


def cmd_evaluate(cfg: Optional[RunConfig], args) -> None:
    vol = Path(args.volume) if args.volume else cfg.path("volume")
    ref = Path(args.reference) if args.reference else cfg.path("phantom")
    u, _ = io.read_array(vol)
    u_star, _ = io.read_array(ref)
    value = sim.rmse(u, u_star)
    report = {"rmse": value, "volume": str(vol), "reference": str(ref)}
    if args.report:
        report_path = Path(args.report)
    elif cfg is not None and "report" in cfg.paths:
        report_path = cfg.paths["report"]
    else:
        report_path = vol.with_name(vol.name + ".report.json")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"RMSE {value:.6g}")


def cmd_export(cfg: RunConfig, args) -> None:
    vol = Path(args.volume) if args.volume else cfg.path("volume")
    u = _load_volume(cfg, vol)
    what = args.what
    out_dir = cfg.paths.get("export_dir", vol.parent)
    if what == "central-section":
        out = Path(args.out) if args.out else Path(out_dir) / (vol.name + ".central.pgm")
        io.write_pgm16(out, to_uint16(central_section(u, cfg.grid), cfg.window))
    elif what.startswith("row-section:"):
        j = int(what.split(":", 1)[1])
        out = Path(args.out) if args.out else Path(out_dir) / (vol.name + f".row{j}.pgm")
        io.write_pgm16(out, to_uint16(row_section(u, cfg.grid, j), cfg.window))
    elif what.startswith("profile:"):
        z = float(what.split(":", 1)[1])
        r, vals = profile(u, cfg.grid, z)
        out = Path(args.out) if args.out else Path(out_dir) / (vol.name + f".profile_{z:g}.csv")
        io.write_csv(out, ["r", "u"], zip(r.tolist(), vals.tolist()))
    else:
        raise ValueError(f"unknown export selection {what!r}")
    print(f"wrote {out}")


COMMANDS = {
    "build-matrix": cmd_build_matrix,
    "phantom": cmd_phantom,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="axitomo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help, config_required=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=config_required)
        return p

    p = add("build-matrix", "assemble the imaging matrix")
    p.add_argument("--no-symmetry", action="store_true", help="trace every ray (debug)")
    p.add_argument("--out")

    p = add("phantom", "rasterize the configured phantom")
    p.add_argument("--out")

    p = add("simulate", "forward-project the phantom and add noise")
    p.add_argument("--matrix")
    p.add_argument("--phantom")
    p.add_argument("--out")

    p = add("reconstruct", "reconstruct a volume from projection data")
    p.add_argument("--method", choices=("atf", "tv"), default="atf")
    p.add_argument("--matrix")
    p.add_argument("--projection")
    p.add_argument("--out")
    p.add_argument("--diagnostics")

    p = add("evaluate", "RMSE of a volume against a reference", config_required=False)
    p.add_argument("--volume")
    p.add_argument("--reference")
    p.add_argument("--report")

    p = add("export", "write sections and profiles")
    p.add_argument("--what", required=True,
                   help="central-section | row-section:<j> | profile:<z>")
    p.add_argument("--volume")
    p.add_argument("--out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is None and args.command == "evaluate" and not (args.volume and args.reference):
            raise ConfigError("evaluate needs --config or both --volume and --reference")
        COMMANDS[args.command](cfg, args)
    except (ConfigError, FormatError, ValueError, IndexError, OSError, FloatingPointError) as exc:
        err = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
