"""
Command-line entry point: data generation, training, offline and online
evaluation, and projection dumps.

    python cli.py [--config app.json] [--seed N] [--out-dir runs] <command> ...
"""
import argparse
import os
import sys
from typing import List, Optional

from config import DEBUG_CHECKS, OUT_DIR, SEED, AppConfig
from core.errors import DrivingStackError
from core.tensor import set_debug_checks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lidar-drive", description="LiDAR driving stack: simulate, train, evaluate.")
    parser.add_argument("--config", help="JSON file with sections model/train/controller/lidar/sim/eval")
    parser.add_argument("--seed", type=int, default=None, help=f"root seed (default {SEED})")
    parser.add_argument("--out-dir", default=OUT_DIR, help="output directory")
    parser.add_argument("--no-registry", action="store_true", help="do not record runs in the SQLite registry")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="drive the expert over the scene/route/condition matrix")
    gen.add_argument("--scenes", nargs="+", help="scene names or JSON paths (default from config)")
    gen.add_argument("--conditions", nargs="+", help="traffic conditions (default from config)")
    gen.add_argument("--splits", nargs="+", default=["trainval", "test"])
    gen.add_argument("--test-repeats", type=int, default=None)
    gen.add_argument("--workers", type=int, default=None)
    gen.add_argument("--log-dir", help="destination (default <out-dir>/logs)")

    tr = sub.add_parser("train", help="train a model on expert logs")
    tr.add_argument("--logs", help="log directory (default <out-dir>/logs)")
    tr.add_argument("--epochs", type=int, help="override train.max_epochs")
    tr.add_argument("--run-dir", help="run directory (default <out-dir>/train)")

    off = sub.add_parser("eval-offline", help="score checkpoints on held-out logs")
    off.add_argument("--logs", help="log directory (default <out-dir>/logs)")
    off.add_argument("--checkpoint", nargs="*", default=[], help="checkpoint directories or model.dpw files")
    off.add_argument("--oracle", action="store_true", help="also score a model that returns the logged labels")
    off.add_argument("--zero", action="store_true", help="also score a model that outputs zeros")
    off.add_argument("--constant", action="store_true", help="also score the median labels of the trainval split")
    off.add_argument("--conditions", nargs="+")
    off.add_argument("--report", help="CSV path (default <out-dir>/offline_report.csv)")

    drv = sub.add_parser("drive", help="closed-loop test drives with the safety driver")
    drv.add_argument("--checkpoint", help="checkpoint to drive with")
    drv.add_argument("--expert", action="store_true", help="drive with the scripted expert instead")
    drv.add_argument("--zero", action="store_true", help="drive with a model that outputs zeros")
    drv.add_argument("--scenes", nargs="+")
    drv.add_argument("--routes", nargs="+", help="route names (default: the evaluation split)")
    drv.add_argument("--conditions", nargs="+")
    drv.add_argument("--repeats", type=int)
    drv.add_argument("--report", help="CSV path (default <out-dir>/online_report.csv)")
    drv.add_argument("--no-replay", action="store_true", help="skip writing episode replay logs")

    proj = sub.add_parser("project", help="dump the grids and images of one log sample")
    proj.add_argument("log", help="episode log (.dpl)")
    proj.add_argument("--index", type=int, default=0, help="sample index")
    proj.add_argument("--dir", help="destination (default <out-dir>/projection)")
    return parser


def load_app_config(args) -> AppConfig:
    config = AppConfig.load(args.config)
    if args.seed is not None:
        config = config.model_copy(update={
            "train": config.train.model_copy(update={"seed": args.seed}),
            "model": config.model.model_copy(update={"init_seed": args.seed}),
        })
    return config


def _seed(args) -> int:
    return SEED if args.seed is None else args.seed


def _store(args):
    if args.no_registry:
        return None
    from database.run_store import get_run_store
    return get_run_store()


def model_label(checkpoint: str) -> str:
    """Run name for a checkpoint: ``runs/front/best`` -> ``front``."""
    path = os.path.normpath(checkpoint)
    if not os.path.isdir(path):
        path = os.path.dirname(path)
    name = os.path.basename(path)
    if name == "best":
        name = os.path.basename(os.path.dirname(path)) or name
    return name


def cmd_gen_data(args, config: AppConfig) -> int:
    from simulation.datagen import generate_dataset

    log_dir = args.log_dir or os.path.join(args.out_dir, "logs")
    entries = generate_dataset(
        log_dir,
        args.scenes or config.sim.scenes,
        args.conditions or config.sim.conditions,
        _seed(args),
        sim=config.sim,
        lidar=config.lidar,
        splits=args.splits,
        test_repeats=args.test_repeats or config.eval.repeats,
        workers=args.workers,
    )
    print(f"[CLI] {len(entries)} logs in {log_dir}")
    return 0


def cmd_train(args, config: AppConfig) -> int:
    from training.dataset import load_dataset
    from training.trainer import train

    train_config = config.train
    if args.epochs:
        train_config = train_config.model_copy(update={"max_epochs": args.epochs})
    dataset = load_dataset(
        args.logs or os.path.join(args.out_dir, "logs"),
        split="trainval",
        use_logged_commands=config.controller.use_logged_commands,
        stride=train_config.sample_stride,
    )
    run_dir = args.run_dir or os.path.join(args.out_dir, "train")
    result = train(dataset, config.model, train_config, run_dir, store=_store(args))
    print(f"[CLI] best checkpoint {result.best_dir} (epoch {result.best_epoch}, val {result.best_val:.4f})")
    return 0


def cmd_eval_offline(args, config: AppConfig) -> int:
    from agents.model_agent import ConstantModel, OracleModel, ZeroModel
    from evaluation.offline import load_eval_logs, offline_eval
    from evaluation.reports import record_reports, write_offline_report
    from model.network import DrivingNetwork
    from training.dataset import load_dataset

    log_dir = args.logs or os.path.join(args.out_dir, "logs")
    models = [(model_label(path), DrivingNetwork.load(path)) for path in args.checkpoint]
    if args.oracle:
        models.append(("oracle", OracleModel(config.model)))
    if args.zero:
        models.append(("zero", ZeroModel(config.model)))
    if args.constant:
        trainval = load_dataset(log_dir, "trainval", config.controller.use_logged_commands, skip_corrupt=config.eval.skip_corrupt)
        models.append(("constant", ConstantModel.fit(trainval, config.model)))
    if not models:
        raise DrivingStackError("eval-offline needs --checkpoint or a baseline (--oracle, --zero, --constant)")

    dataset = load_eval_logs(log_dir, config.eval, config.controller)
    rows = []
    for name, model in models:
        rows.extend(offline_eval(model, dataset, name, args.conditions))
    report = args.report or os.path.join(args.out_dir, "offline_report.csv")
    write_offline_report(report, rows)

    store = _store(args)
    if store is not None:
        run_id = store.create_run("eval-offline", ",".join(n for n, _ in models), os.path.dirname(os.path.abspath(report)),
                                  {"checkpoints": args.checkpoint, "eval": config.eval.model_dump(mode="json")})
        record_reports(store, run_id, rows)
    print(f"[CLI] offline report: {report}")
    return 0


def cmd_drive(args, config: AppConfig) -> int:
    from agents.controller import init_control_weights
    from agents.model_agent import ZeroModel
    from evaluation.online import online_eval
    from evaluation.reports import record_reports, write_episode_table, write_online_report
    from model.network import DrivingNetwork
    from simulation.world import load_scenes
    from training.trainer import load_alpha

    weights = None
    if args.expert:
        model, name = None, "expert"
    elif args.zero:
        model, name = ZeroModel(config.model), "zero"
    elif args.checkpoint:
        model, name = DrivingNetwork.load(args.checkpoint), model_label(args.checkpoint)
        alpha = load_alpha(args.checkpoint)
        if alpha is not None:
            weights = init_control_weights(alpha)
    else:
        raise DrivingStackError("drive needs --checkpoint, --expert or --zero")

    eval_config = config.eval
    if args.repeats:
        eval_config = eval_config.model_copy(update={"repeats": args.repeats})
    drive_dir = os.path.join(args.out_dir, "drive", name)
    rows, scores = online_eval(
        model,
        load_scenes(args.scenes or config.sim.scenes),
        name,
        conditions=args.conditions,
        eval_config=eval_config,
        controller=config.controller,
        sim=config.sim,
        lidar=config.lidar,
        weights=weights,
        seed=_seed(args),
        routes=args.routes,
        replay_dir=None if args.no_replay else os.path.join(drive_dir, "replays"),
    )
    report = args.report or os.path.join(args.out_dir, "online_report.csv")
    write_online_report(report, rows)
    write_episode_table(os.path.join(drive_dir, "episodes.csv"), scores)

    store = _store(args)
    if store is not None:
        run_id = store.create_run("drive", name, drive_dir, {"checkpoint": args.checkpoint, "eval": eval_config.model_dump(mode="json")})
        record_reports(store, run_id, rows)
    print(f"[CLI] online report: {report}")
    return 0


def cmd_project(args, config: AppConfig) -> int:
    from perception.grid_io import write_grid
    from perception.projection import project_bev, project_front
    from perception.render import render_to_file
    from simulation.episode_log import read_log

    log = read_log(args.log)
    if not 0 <= args.index < len(log):
        raise DrivingStackError(f"sample index {args.index} outside [0, {len(log)})")
    cloud = log.samples[args.index].cloud
    out = args.dir or os.path.join(args.out_dir, "projection")
    os.makedirs(out, exist_ok=True)
    stem = f"{os.path.splitext(os.path.basename(args.log))[0]}_{args.index:04d}"
    grids = {"front": project_front(cloud, config.model.front_grid), "bev": project_bev(cloud, config.model.bev_grid)}
    for mode, grid in grids.items():
        write_grid(os.path.join(out, f"{stem}_{mode}.grid"), grid)
        render_to_file(grid, os.path.join(out, f"{stem}_{mode}.png"))
        print(f"[CLI] {mode}: {grid.occupied_cells()} occupied cells -> {out}/{stem}_{mode}.grid/.png")
    return 0


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval-offline": cmd_eval_offline,
    "drive": cmd_drive,
    "project": cmd_project,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a library error, 2 on bad arguments
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if DEBUG_CHECKS:
        set_debug_checks(True)
    try:
        config = load_app_config(args)
        return HANDLERS[args.command](args, config)
    except DrivingStackError as e:
        print(f"[CLI Error] {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"[CLI Error] {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
