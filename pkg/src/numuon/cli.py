"""Command-line entry point.

Subcommands::

    numuon train    --config PATH
    numuon diagnose --ckpt PATH [--csv]
    numuon compress --ckpt PATH --rate R [--policy P] [--out PATH]
    numuon eval     --ckpt PATH --task T
    numuon sweep    --config PATH [--workers N]
    numuon lp       --sigma a,b,c --rho R --tau T

Exit codes: 0 ok, 2 config or argument error, 3 diverged, 4 I/O, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .compression import checkpoint_params, compress_model, densify, eval_compressed
from .config import config_from_dict, load_config
from .diagnostics import report_block
from .errors import ConfigError, Diverged, FormatError, NumuonError
from .io import read_checkpoint, write_checkpoint
from .lmo import NormBudget, brute_force_lp, capped_simplex_lp
from .models import TaskSpec, make_dataset
from .train import model_from_meta, train_run

log = logging.getLogger("numuon")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_NUMERICAL = 5


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, Diverged):
        return EXIT_DIVERGED
    if isinstance(exc, (OSError, FormatError)):
        return EXIT_IO
    if isinstance(exc, (ArithmeticError, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, NumuonError, ValueError, KeyError)):
        return EXIT_CONFIG
    raise exc


def _default_out(cfg) -> Path:
    return Path("runs") / f"{cfg.optimizer.mode}_seed{cfg.seed}"


def cmd_train(config_path) -> int:
    cfg = load_config(config_path)
    out = Path(cfg.output_dir) if cfg.output_dir else _default_out(cfg)
    result = train_run(cfg, out_dir=out)
    print(json.dumps(result.summary, sort_keys=True))
    print(f"wrote {out}")
    return EXIT_OK


def _matrix_blocks(dense: dict) -> dict[str, np.ndarray]:
    return {n: w for n, w in dense.items() if np.ndim(w) == 2 and min(np.shape(w)) > 1}


def cmd_diagnose(checkpoint_path, csv_out: bool = False, ks=(1, 4, 16)) -> int:
    blocks, _ = read_checkpoint(checkpoint_path)
    dense = densify(blocks)
    reports = [report_block(W, ks=ks, block_name=n).to_dict() for n, W in _matrix_blocks(dense).items()]
    path = Path(checkpoint_path)
    jsonl = path.with_suffix(".diag.jsonl")
    with open(jsonl, "w", encoding="utf-8") as fh:
        for rep in reports:
            line = json.dumps(rep, sort_keys=True)
            fh.write(line + "\n")
            print(line)
    if csv_out:
        cols = ["block_name", "stable_rank", "normalized_stable_rank", "nuclear_norm", "top_singular"]
        tail_keys = sorted({k for r in reports for k in r["tail_energy_k"]}, key=int)
        with open(path.with_suffix(".diag.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols + [f"tail_energy_{k}" for k in tail_keys])
            for r in reports:
                w.writerow([r[c] for c in cols] + [r["tail_energy_k"].get(k, "") for k in tail_keys])
    return EXIT_OK


def cmd_compress(checkpoint_path, rate: float, policy: str = "body", out=None) -> int:
    blocks, meta = read_checkpoint(checkpoint_path)
    compressed, plan = compress_model(blocks, rate, policy)
    path = Path(checkpoint_path)
    out = Path(out) if out is not None else path.with_name(f"{path.stem}.rate{rate:g}.ckpt")
    write_checkpoint(out, compressed, meta={**meta, "compression": plan.to_dict()})
    plan_path = out.with_suffix(".plan.json")
    plan_path.write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(plan.to_dict(), sort_keys=True))
    print(f"wrote {out}")
    return EXIT_OK


def evaluate_checkpoint(checkpoint_path, task: str) -> dict:
    """Eval-set metrics of a dense or factored checkpoint on the task it was trained for."""
    blocks, meta = read_checkpoint(checkpoint_path)
    if "sizes" not in meta:
        raise FormatError(f"{checkpoint_path}: no model layout in header meta")
    spec = meta.get("task_spec") or {}
    if spec.get("kind") == task:
        task_spec = TaskSpec(**spec)
    else:
        task_spec = TaskSpec(kind=task)
    model = model_from_meta(meta, densify(blocks))
    data = make_dataset(task_spec, model.input_dim, model.output_dim)
    metrics = eval_compressed(model, None, data.X_eval, data.Y_eval, task_spec.kind)
    metrics["params"] = checkpoint_params(blocks)
    metrics["task"] = task_spec.kind
    return metrics


def cmd_eval(checkpoint_path, task: str) -> int:
    metrics = evaluate_checkpoint(checkpoint_path, task)
    path = Path(checkpoint_path)
    path.with_suffix(".eval.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"sweep key {key!r}: {p} is not a section")
        node = nxt
    node[parts[-1]] = value
    if key == "optimizer.lr" and isinstance(d.get("lr_schedule"), dict):
        d["lr_schedule"]["base_lr"] = value


def expand_sweep(data: dict) -> list[tuple[str, dict]]:
    """Cross product of ``sweep.grid`` applied to the base document, as ``(child_name, config_dict)``."""
    sweep = data.get("sweep")
    if not isinstance(sweep, dict) or not isinstance(sweep.get("grid"), dict) or not sweep["grid"]:
        raise ConfigError("sweep config needs a non-empty 'sweep.grid' object")
    grid = sweep["grid"]
    keys = sorted(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigError(f"sweep.grid[{k!r}] must be a non-empty list")
    base = {k: v for k, v in data.items() if k != "sweep"}
    children = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        doc = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_dotted(doc, k, v)
        name = "__".join(f"{k}={v}" for k, v in zip(keys, combo))
        children.append((name, doc))
    return children


def _run_child(args) -> dict:
    name, doc, out, rates, policy = args
    cfg = config_from_dict(doc)
    row = {"run": name, "mode": cfg.optimizer.mode, "seed": cfg.seed}
    try:
        res = train_run(cfg, out_dir=out)
    except Diverged as exc:
        row["status"] = f"diverged: {exc}"
        return row
    row.update(status="ok", **{k: res.summary[k] for k in ("train_loss", "eval_loss", "mean_normalized_stable_rank")})
    ckpt = res.model.blocks()
    for rate in rates:
        compressed, _ = compress_model(ckpt, rate, policy)
        m = eval_compressed(res.model, compressed, res.dataset.X_eval, res.dataset.Y_eval, cfg.task.kind)
        row[f"eval_loss@{rate:g}"] = m["loss"]
    return row


def cmd_sweep(config_path, workers: int = 1) -> int:
    try:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    children = expand_sweep(data)
    sweep = data["sweep"]
    rates = [float(r) for r in sweep.get("compress_rates", [])]
    policy = sweep.get("compress_policy", "body")
    root = Path(data.get("output_dir") or "runs/sweep")
    jobs = []
    for name, doc in children:
        doc = dict(doc, output_dir=str(root / name))
        config_from_dict(doc)
        jobs.append((name, doc, root / name, rates, policy))
    root.mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_child, jobs))
    else:
        rows = [_run_child(j) for j in jobs]
    with open(root / "summary.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(format_table(rows))
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_DIVERGED


def format_table(rows: list[dict]) -> str:
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]

    def cell(v):
        return f"{v:.4g}" if isinstance(v, float) else str(v)

    table = [cols] + [[cell(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table)


def cmd_lp(sigma, rho: float, tau: float) -> int:
    budget = NormBudget(rho=rho, tau=tau)
    sol = capped_simplex_lp(sigma, budget)
    brute = brute_force_lp(sigma, budget)
    agree = abs(sol.objective - brute) <= 1e-10 * max(1.0, abs(brute))
    print(f"s          = {np.array2string(sol.s, precision=6)}")
    print(f"rank       = {sol.active_rank}")
    print(f"objective  = {sol.objective:.12g}")
    print(f"brute      = {brute:.12g}")
    print(f"agree      = {agree}")
    return EXIT_OK if agree else EXIT_NUMERICAL


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="numuon", description="Muon / NuMuon desk-scale experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="run one training job from a JSON config")
    s.add_argument("--config", required=True)

    s = sub.add_parser("diagnose", help="spectral report for every weight matrix of a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--csv", action="store_true", help="also write a CSV next to the checkpoint")

    s = sub.add_parser("compress", help="truncated-SVD compression of a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--rate", required=True, type=float)
    s.add_argument("--policy", default="body", help="body | all | comma-separated block names")
    s.add_argument("--out", default=None)

    s = sub.add_parser("eval", help="eval-set loss of a dense or compressed checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--task", required=True, help="lowrank_teacher_regression | softmax_classification")

    s = sub.add_parser("sweep", help="cross-product of runs with a summary table")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("lp", help="solve the capped-simplex LP and check it by brute force")
    s.add_argument("--sigma", required=True, type=_floats)
    s.add_argument("--rho", required=True, type=float)
    s.add_argument("--tau", required=True, type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "diagnose":
            return cmd_diagnose(args.ckpt, csv_out=args.csv)
        if args.command == "compress":
            return cmd_compress(args.ckpt, args.rate, args.policy, args.out)
        if args.command == "eval":
            return cmd_eval(args.ckpt, args.task)
        if args.command == "sweep":
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            return cmd_sweep(args.config, args.workers)
        return cmd_lp(args.sigma, args.rho, args.tau)
    except Exception as exc:  # noqa: BLE001 - mapped to documented exit codes
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
