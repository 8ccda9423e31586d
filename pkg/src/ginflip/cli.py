"""Command-line harness.

Subcommands: gen-data, train, attack, eval, wl-stats.  Every command is
deterministic under its config seed; wall-clock details go to a sidecar
run.log only.  Exit codes: 0 success, 2 usage/config error, 3 training
failure, 4 evaluation failure, 5 attack protocol cap reached.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import config as cfgmod
from .attacks import AttackConfig, escalation_protocol
from .errors import (
    ConfigError,
    DataFormatError,
    EvaluationError,
    GinflipError,
    MetricUndefinedError,
    ParameterError,
    TrainingDivergenceError,
)
from .graphs import Dataset, gen_wl_task, split_dataset
from .losses import LossKind
from .metrics import MetricKind, evaluate_model
from .models import ModelConfig, init_model, load_checkpoint, save_checkpoint
from .reporting import (
    load_flip_log,
    render_summary_csv,
    replay_flips,
    write_curve_csv,
    write_flip_log,
    write_report,
)
from .training import train_quantized
from .tu_io import load_tu_dataset, write_tu_dataset
from .wl import epsilon_glwl_statistic

OUT_DIR_ENV = "GINFLIP_OUT"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _resolve_out(config_out: str, flag_out: str | None) -> str:
    if flag_out:
        return flag_out
    return os.environ.get(OUT_DIR_ENV) or config_out


def _load_dataset(data: cfgmod.DataSpec) -> Dataset:
    if data.source == "tu":
        return load_tu_dataset(data.directory, data.name)
    return gen_wl_task(data.family, data.per_class, data.sizes, data.seed)


def _experiment(args) -> tuple[cfgmod.ExperimentConfig, Dataset, tuple[Dataset, Dataset, Dataset]]:
    cfg = cfgmod.load_experiment_config(args.config, seed_override=getattr(args, "seed", None))
    dataset = _load_dataset(cfg.data)
    splits = split_dataset(dataset, cfg.split)
    return cfg, dataset, splits


def _model_config(cfg: cfgmod.ExperimentConfig, dataset: Dataset) -> ModelConfig:
    if dataset.task_kind == "multiclass":
        output_dim = dataset.num_classes
    else:
        output_dim = dataset.num_tasks
    return ModelConfig(
        architecture=cfg.model.architecture,
        num_layers=cfg.model.num_layers,
        hidden_dim=cfg.model.hidden_dim,
        input_dim=dataset.label_alphabet_size,
        output_dim=output_dim,
        mlp_depth=cfg.model.mlp_depth,
        epsilon=cfg.model.epsilon,
        virtual_node=cfg.model.virtual_node,
        seed=cfg.model.seed,
    )


def cmd_gen_data(args) -> int:
    sizes = cfgmod.parse_sizes(args.sizes)
    dataset = gen_wl_task(args.family, args.per_class, sizes, args.seed)
    write_tu_dataset(dataset, args.out, args.name)
    print(f"wrote {dataset.num_graphs} graphs to {args.out} (name {args.name})")
    return 0


def cmd_train(args) -> int:
    cfg, dataset, (train, valid, test) = _experiment(args)
    out_dir = _resolve_out(cfg.out_dir, args.out)
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()

    model = init_model(_model_config(cfg, dataset))
    trained, history = train_quantized(
        model,
        train,
        valid,
        epochs=cfg.training.epochs,
        lr=cfg.training.lr,
        batch_size=cfg.training.batch_size,
        seed=cfg.training.seed,
        metric_kind=cfg.training.metric,
    )
    save_checkpoint(trained, os.path.join(out_dir, "model.ckpt"))
    metric = cfg.training.metric.value
    with open(os.path.join(out_dir, "history.csv"), "w", newline="\n") as fh:
        fh.write(f"epoch,train_loss,valid_loss,train_{metric},valid_{metric}\n")
        for rec in history:
            fh.write(
                f"{rec.epoch},{_fmt(rec.train_loss)},{_fmt(rec.valid_loss)},"
                f"{_fmt(rec.train_metric)},{_fmt(rec.valid_metric)}\n"
            )
    result = evaluate_model(trained, test, cfg.training.metric)
    summary = f"clean test {metric} = {_fmt(result.value)}"
    with open(os.path.join(out_dir, "summary.txt"), "w", newline="\n") as fh:
        fh.write(summary + "\n")
    with open(os.path.join(out_dir, "run.log"), "w") as fh:
        fh.write(f"train wall seconds: {time.time() - started:.3f}\n")
    print(summary)
    return 0


def _attack_config(spec: cfgmod.AttackSpec) -> AttackConfig:
    return AttackConfig(
        attack=spec.attack,
        attack_runs=spec.attack_runs,
        candidates_per_layer=spec.candidates_per_layer,
        max_combination_size=spec.max_combination_size,
        batch_size=spec.batch_size,
        loss=LossKind.parse(spec.loss) if spec.loss else None,
        pool_fraction=spec.pool_fraction,
        seed=spec.seed,
        resample_batch=spec.resample_batch,
    )


def cmd_attack(args) -> int:
    if args.replay:
        if not args.checkpoint or not args.out:
            raise ConfigError("--replay needs --checkpoint and --out")
        params = load_checkpoint(args.checkpoint)
        replay_flips(params, load_flip_log(args.replay))
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        save_checkpoint(params, args.out)
        print(f"replayed {args.replay} onto {args.checkpoint} -> {args.out}")
        return 0

    cfg, dataset, (train, valid, test) = _experiment(args)
    if not cfg.attacks:
        raise ConfigError("no [attack.*] sections configured")
    out_dir = _resolve_out(cfg.out_dir, args.out)
    os.makedirs(out_dir, exist_ok=True)
    checkpoint = args.checkpoint or os.path.join(out_dir, "model.ckpt")
    if not os.path.isfile(checkpoint):
        raise ConfigError(f"checkpoint {checkpoint} does not exist")
    params = load_checkpoint(checkpoint)
    expected = _model_config(cfg, dataset)
    if params.config != expected:
        raise ConfigError(
            f"checkpoint config {params.config} does not match experiment {expected}"
        )
    metric_kind = cfg.protocol.metric
    rate = None
    if metric_kind == MetricKind.AP:
        from .metrics import positive_rate

        rate = positive_rate(test)
    started = time.time()
    result = escalation_protocol(
        params,
        [_attack_config(a) for a in cfg.attacks],
        train,
        eval_data=test,
        metric_kind=metric_kind,
        initial_runs=cfg.protocol.initial_runs,
        cap=cfg.protocol.cap,
        positive_rate=rate,
    )
    for name, report in result.reports.items():
        write_report(report, metric_kind, os.path.join(out_dir, f"report_{name}.txt"))
        write_curve_csv(report, metric_kind, os.path.join(out_dir, f"curve_{name}.csv"))
        write_flip_log(report, os.path.join(out_dir, f"flips_{name}.log"))
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="\n") as fh:
        fh.write(render_summary_csv(result, metric_kind))
    with open(os.path.join(out_dir, "run.log"), "w") as fh:
        fh.write(f"attack wall seconds: {time.time() - started:.3f}\n")
    print(
        f"protocol finished at {result.attack_runs} runs; "
        + ", ".join(
            f"{name}: {_fmt(rep.final_metric)}" for name, rep in result.reports.items()
        )
    )
    if result.capped:
        print("no attack reached random output (cap reached)")
        return 5
    return 0


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_tu_dataset(args.data_dir, args.name)
    metric_kind = MetricKind.parse(args.metric)
    result = evaluate_model(params, dataset, metric_kind)
    print(f"{metric_kind.value} = {_fmt(result.value)} over {result.n_evaluated} targets")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("task,metric_kind,value\n")
            for t, v in enumerate(result.per_task_values):
                fh.write(f"{t},{metric_kind.value},{'' if v is None else _fmt(v)}\n")
    return 0


def cmd_wl_stats(args) -> int:
    dataset = load_tu_dataset(args.data_dir, args.name)
    stat = epsilon_glwl_statistic(dataset, args.k_max, args.sample, args.seed)
    lines = ["k,class,mean_jaccard,pairs_counted"]
    for ki, k in enumerate(stat.ks):
        for ci, c in enumerate(stat.class_ids):
            lines.append(
                f"{k},{c},{_fmt(stat.mean_jaccard[ki, ci])},{stat.pairs_counted[ki, ci]}"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ginflip",
        description="Train INT8-quantized GNNs and attack them with bit flips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic structural task in TU layout")
    p.add_argument("--family", required=True)
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--sizes", required=True, help="node count range lo:hi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="synthetic")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a quantized model from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run the attack escalation protocol")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--replay", default=None, help="flip log to re-apply byte-exactly")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a TU dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True, dest="data_dir")
    p.add_argument("--name", required=True)
    p.add_argument("--metric", default="ACC")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("wl-stats", help="within-class WL Jaccard statistic as CSV")
    p.add_argument("--data-dir", required=True, dest="data_dir")
    p.add_argument("--name", required=True)
    p.add_argument("--k-max", type=int, default=7, dest="k_max")
    p.add_argument("--sample", type=int, default=3200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_wl_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergenceError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 3
    except (EvaluationError, MetricUndefinedError) as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return 4
    except GinflipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
