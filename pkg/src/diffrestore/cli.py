"""Command-line driver.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
Failures print one JSON object to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, plotting, schedule as schedmod, store
from .config import ExperimentConfig, ScheduleConfig, load_config, load_schedule_config, save_config
from .errors import ConfigError, DiffRestoreError, InputError
from .experiment import derive_seed, make_pairs
from .models import DenoiserModel, DiffusedEstimator, from_diffusion, to_diffusion
from .models.core import train_denoiser, train_estimator
from .models.gmm import GaussianMixtureWorld, gm_optimal_denoiser
from .sampler import reconstruct_probe, restore_run

log = logging.getLogger("diffrestore")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _fresh_dir(path: Path, force: bool) -> Path:
    if path.exists() and any(path.iterdir()) and not force:
        raise InputError(f"{path} already exists; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fresh_file(path: Path, force: bool) -> Path:
    if path.exists() and not force:
        raise InputError(f"{path} already exists; pass --force to overwrite")
    return path


def _run_dir(args, prefix: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    runs = Path(args.runs_dir) if args.runs_dir else store.default_runs_dir()
    return runs / f"{prefix}-{time.strftime('%Y%m%d-%H%M%S')}"


def _sampling_schedule(cfg: ExperimentConfig, respacing: int | None):
    base = cfg.build_schedule()
    k = respacing if respacing is not None else cfg.sampler.respacing
    return schedmod.respace(base, k) if k < base.T else base


def cmd_gen_data(args):
    cfg = _config(args)
    if args.count < 0:
        raise ConfigError("--count must be non-negative")
    root = Path(args.out) if args.out else Path(cfg.paths.datasets_dir) / args.name
    _fresh_dir(root, args.force)
    pairs = make_pairs(args.count, args.mode, cfg.seed, cfg.data.size)
    store.write_dataset(root, pairs, {"mode": args.mode, "seed": cfg.seed, "size": cfg.data.size,
                                      "generator": "toyfaces"})
    print(json.dumps({"dataset": str(root), "count": args.count, "mode": args.mode}))


def _load_training_set(path):
    hq, lq, manifest = store.read_dataset(path)
    if len(hq) == 0:
        raise InputError(f"dataset {path} is empty")
    return hq, lq


def cmd_train_estimator(args):
    cfg = _config(args)
    out = _fresh_file(Path(args.out), args.force)
    tc = cfg.estimator
    if args.arch:
        tc.arch = args.arch
    if args.steps is not None:
        tc.steps = args.steps
    tc.seed = derive_seed(cfg.seed, f"train/estimator/{tc.arch}")
    hq, lq = _load_training_set(args.dataset)
    model = train_estimator(lq, hq, tc)
    store.save_model(model, out)
    print(json.dumps({"checkpoint": str(out), "final_loss": float(np.mean(model.loss_history[-50:]))}))


def cmd_train_denoiser(args):
    cfg = _config(args)
    out = _fresh_file(Path(args.out), args.force)
    tc = cfg.denoiser
    if args.steps is not None:
        tc.steps = args.steps
    tc.seed = derive_seed(cfg.seed, "train/denoiser")
    hq, _ = _load_training_set(args.dataset)
    model = train_denoiser(hq, cfg.build_schedule(), tc)
    store.save_model(model, out)
    print(json.dumps({"checkpoint": str(out), "final_loss": float(np.mean(model.loss_history[-50:]))}))


def _models(args):
    for p in (args.estimator, args.denoiser):
        if p and not Path(p).exists():
            raise ConfigError(f"checkpoint {p} does not exist")
    est = store.load_model(args.estimator, DiffusedEstimator) if getattr(args, "estimator", None) else None
    den = store.load_model(args.denoiser, DenoiserModel)
    return est, den


def cmd_restore(args):
    cfg = _config(args)
    sched = _sampling_schedule(cfg, args.respacing)
    est, den = _models(args)
    lq, names = store.load_images(args.input)
    N = args.N if args.N is not None else cfg.sampler.N
    seeds = args.seeds or [derive_seed(cfg.seed, f"restore/{i}") for i in range(len(cfg.sampler.seeds))]
    run_dir = _fresh_dir(_run_dir(args, "restore"), args.force)
    run = restore_run(to_diffusion(lq), N, est, den, sched, seeds,
                      store.sha256_file(args.estimator), store.sha256_file(args.denoiser))
    outputs = []
    for seed, out in zip(seeds, run.outputs):
        for name, img in zip(names, from_diffusion(out)):
            p = store.save_png(img, run_dir / "outputs" / f"{Path(name).stem}_seed{seed}.png")
            outputs.append({"file": str(p.relative_to(run_dir)), "input": name, "seed": seed,
                            "sha256": store.sha256_file(p)})
    metrics = {}
    if args.reference:
        ref, _ = store.load_images(args.reference)
        for seed, out in zip(seeds, run.outputs):
            rep = analysis.evaluate(from_diffusion(out), ref)
            metrics[str(seed)] = {"psnr": rep.psnr, "ssim": rep.ssim}
    save_config(cfg, run_dir / "config.toml")
    store.write_json(run_dir / "manifest.json", {
        "kind": "restore", "created": time.strftime("%Y-%m-%dT%H:%M:%S"), "input": str(args.input),
        "run": run.to_dict(), "outputs": outputs, "metrics": metrics,
        "checkpoints": {"estimator": str(args.estimator), "denoiser": str(args.denoiser)},
    })
    print(json.dumps({"run": str(run_dir), "outputs": len(outputs)}))


def _probe_rows(x0, grid, den, sched, seed, clip):
    rows = []
    for N in grid:
        rec = reconstruct_probe(x0, N, den, sched, seed, clip_x0=clip)
        err = rec - x0
        rows.append({"N": N, "rmse": float(np.sqrt(np.mean(err ** 2))), "mae": float(np.mean(np.abs(err)))})
    return rows


def cmd_probe(args):
    cfg = _config(args)
    sched = _sampling_schedule(cfg, args.respacing)
    seed = derive_seed(cfg.seed, "probe")
    if args.oracle_world:
        world = GaussianMixtureWorld.default(dim=4, seed=derive_seed(cfg.seed, "probe/world"))
        x0 = world.sample(args.samples, np.random.default_rng(derive_seed(cfg.seed, "probe/data")))
        den = gm_optimal_denoiser(world, sched.base)
        clip = None
    else:
        if not (args.input and args.denoiser):
            raise ConfigError("probe needs --input and --denoiser, or --oracle-world")
        if not Path(args.denoiser).exists():
            raise ConfigError(f"checkpoint {args.denoiser} does not exist")
        den = store.load_model(args.denoiser, DenoiserModel)
        x0 = to_diffusion(store.load_images(args.input)[0])
        clip = (-1.0, 1.0)
    for N in args.grid:
        if not 0 <= N < sched.base.T:
            raise ConfigError(f"grid value {N} outside 0..{sched.base.T - 1}")
    out = _fresh_dir(_run_dir(args, "probe"), args.force)
    rows = _probe_rows(x0, args.grid, den, sched, seed, clip)
    csv_path = analysis.write_rows(out / "probe.csv", rows, ("N", "rmse", "mae"))
    plotting.plot_probe(rows, out / "probe.png")
    store.write_json(out / "manifest.json", {"kind": "probe", "oracle_world": bool(args.oracle_world),
                                             "grid": list(args.grid), "rows": rows,
                                             "csv_sha256": store.sha256_file(csv_path)})
    print(json.dumps({"run": str(out), "rows": len(rows)}))


def cmd_sweep(args):
    cfg = _config(args)
    sched = _sampling_schedule(cfg, args.respacing)
    est, den = _models(args)
    hq, lq, _ = store.read_dataset(args.dataset)
    if len(hq) == 0:
        raise InputError(f"dataset {args.dataset} is empty")
    out = _fresh_dir(_run_dir(args, "sweep"), args.force)
    seeds = args.seeds or [derive_seed(cfg.seed, f"sweep/{i}") for i in range(2)]
    rows = analysis.sweep_N(lq, hq, args.grid, est, den, sched, seeds=seeds, out=out / "sweep.csv",
                            progress=lambda r: log.info("sweep %s", r))
    plotting.plot_sweep(rows, out / "sweep.png")
    store.write_json(out / "manifest.json", {"kind": "sweep", "dataset": str(args.dataset), "grid": list(args.grid),
                                             "seeds": seeds, "rows": rows,
                                             "csv_sha256": store.sha256_file(out / "sweep.csv")})
    print(json.dumps({"run": str(out), "rows": len(rows)}))


def cmd_curves(args):
    sched = (load_schedule_config(args.schedule_config) if args.schedule_config else ScheduleConfig()).build()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedmod.export_csv(sched, out / "curves.csv")
    plotting.plot_schedule_curves(sched.timesteps, sched.alphas_cum, schedmod.kappas(sched), out / "curves.png")
    print(json.dumps({"csv": str(out / "curves.csv"), "plot": str(out / "curves.png")}))


def cmd_report(args):
    run = Path(args.run)
    if not (run / "manifest.json").exists():
        raise ConfigError(f"{run} has no manifest.json")
    manifest = store.read_json(run / "manifest.json")
    for item in manifest.get("outputs", []):
        if store.sha256_file(run / item["file"]) != item["sha256"]:
            raise InputError(f"{item['file']}: hash mismatch")
    tables = {p.stem: analysis.read_rows(p) for p in sorted(run.glob("*.csv"))}
    summary = {"kind": "report", "run": str(run), "source_kind": manifest.get("kind"),
               "metrics": manifest.get("metrics", {}), "rows": manifest.get("rows", []), "tables": tables}
    store.write_json(run / "summary.json", summary)
    print(json.dumps({"summary": str(run / "summary.json")}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffrestore", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="root seed; stage seeds are derived from it")
    p.add_argument("--runs-dir", default=None, help=f"run directory root (default ${store.RUNS_ENV} or ./runs)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="synthesize a paired HQ/LQ dataset")
    g.add_argument("--config", help="experiment TOML")
    g.add_argument("--count", type=int, required=True, help="number of pairs")
    g.add_argument("--mode", choices=("train", "eval"), default="train")
    g.add_argument("--name", default="toy")
    g.add_argument("--out", help="dataset directory (default <datasets_dir>/<name>)")
    g.add_argument("--force", action="store_true", help="overwrite existing output")
    g.set_defaults(func=cmd_gen_data)

    for name, func in (("train-estimator", cmd_train_estimator), ("train-denoiser", cmd_train_denoiser)):
        t = sub.add_parser(name, help=f"{name.split('-')[1]} training with an L2 objective")
        t.add_argument("--config", help="experiment TOML")
        t.add_argument("--dataset", required=True, help="directory written by gen-data")
        t.add_argument("--out", required=True, help="checkpoint path")
        t.add_argument("--steps", type=int, help="override the configured step count")
        if name == "train-estimator":
            t.add_argument("--arch", choices=("plain", "residual"))
        t.add_argument("--force", action="store_true", help="overwrite existing output")
        t.set_defaults(func=func)

    r = sub.add_parser("restore", help="restore LQ image(s), one output per seed")
    r.add_argument("--config", help="experiment TOML")
    r.add_argument("--input", required=True, help="PNG file or directory of PNGs")
    r.add_argument("--N", type=int, help="starting timestep (default from config, 400)")
    r.add_argument("--seeds", type=_int_list, help="comma-separated sampler seeds")
    r.add_argument("--estimator", required=True, help="estimator checkpoint")
    r.add_argument("--denoiser", required=True, help="denoiser checkpoint")
    r.add_argument("--respacing", type=int, help="sampling schedule length (default 250)")
    r.add_argument("--reference", help="HQ image(s) for PSNR/SSIM in the manifest")
    r.add_argument("--out", help="run directory (default under --runs-dir)")
    r.add_argument("--force", action="store_true", help="overwrite existing output")
    r.set_defaults(func=cmd_restore)

    pr = sub.add_parser("probe", help="diffuse-then-reconstruct error over a grid of N")
    pr.add_argument("--config", help="experiment TOML")
    pr.add_argument("--input", help="HQ PNG file or directory")
    pr.add_argument("--denoiser", help="denoiser checkpoint")
    pr.add_argument("--oracle-world", action="store_true", help="use a Gaussian-mixture world and its exact denoiser")
    pr.add_argument("--samples", type=int, default=500, help="oracle-world sample count")
    pr.add_argument("--grid", type=_int_list, required=True, help="comma-separated N values")
    pr.add_argument("--respacing", type=int, help="sampling schedule length")
    pr.add_argument("--out", help="run directory")
    pr.add_argument("--force", action="store_true", help="overwrite existing output")
    pr.set_defaults(func=cmd_probe)

    s = sub.add_parser("sweep", help="metrics over a grid of starting timesteps")
    s.add_argument("--config", help="experiment TOML")
    s.add_argument("--dataset", required=True, help="evaluation dataset directory")
    s.add_argument("--grid", type=_int_list, required=True, help="comma-separated N values")
    s.add_argument("--estimator", required=True, help="estimator checkpoint")
    s.add_argument("--denoiser", required=True, help="denoiser checkpoint")
    s.add_argument("--seeds", type=_int_list, help="seeds; diversity needs at least two")
    s.add_argument("--respacing", type=int, help="sampling schedule length")
    s.add_argument("--out", help="run directory")
    s.add_argument("--force", action="store_true", help="overwrite existing output")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("curves", help="alpha_N and kappa_N table and plot")
    c.add_argument("--schedule-config", help="TOML with a [schedule] table")
    c.add_argument("--out", required=True, help="output directory for curves.csv and curves.png")
    c.set_defaults(func=cmd_curves)

    rp = sub.add_parser("report", help="aggregate a run directory into summary.json")
    rp.add_argument("--run", required=True, help="run directory with a manifest.json")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        args.func(args)
    except DiffRestoreError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}),
              file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
