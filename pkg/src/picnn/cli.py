"""Command-line front end.

    picnn generate-data --config cfg.json [--out DIR]
    picnn search-loss   --config cfg.json [--budget K] [--workers W]
    picnn search-arch   --config cfg.json [--strategy S] [--space SP]
                        [--loss genome.json]
    picnn train         --config cfg.json [--genome G] [--arch A]
    picnn evaluate      --config cfg.json --weights DIR [--arch A]
                        [--genome G] [--split test]
    picnn pipeline      --config cfg.json
    picnn report        --run DIR

Exit codes: 0 success, 2 config error, 3 diverged, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .archsearch import SearchDiverged
from .config import (
    ConfigError, config_from_dict, config_to_dict, load_config, read_genome,
    write_genome,
)
from .losses import LossEvaluator, LossGenome
from .networks import build_network, default_choices, search_space
from .pipeline import (
    PipelineDiverged, TestSplitGuard, _build_problem, load_report,
    component_rng, run_final, run_stage1, run_stage2, two_stage_pipeline,
)
from .tensorio import TensorFormatError, save_tensor
from .training import eval_metric, load_params, save_params

SPACE_ALIASES = {"cnn": "cnn_stack", "unet": "unet_entire",
                 "cell": "unet_cell"}


def _resolve_space(name):
    return SPACE_ALIASES.get(name, name)


def _out_dir(cfg, sub=None):
    out = Path(cfg.out_dir)
    if sub:
        out = out / sub
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_choices(path, kind):
    try:
        with open(path) as fh:
            choices = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read architecture file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"architecture file {path} is not valid JSON: {exc}")
    try:
        search_space(kind).validate(choices)
    except ValueError as exc:
        raise ConfigError(f"bad architecture in {path}: {exc}")
    return choices


def cmd_generate_data(args):
    cfg = load_config(args.config)
    problem = _build_problem(cfg)
    out = Path(args.out) if args.out else _out_dir(cfg, "data")
    out.mkdir(parents=True, exist_ok=True)
    meta = {"problem": problem.name, "grid_shape": list(problem.grid_shape),
            "h": list(problem.h), "splits": {}}
    for split, samples in problem.splits.items():
        save_tensor(out / f"{split}_inputs.ptns", samples.inputs)
        save_tensor(out / f"{split}_truths.ptns", samples.truths)
        meta["splits"][split] = len(samples)
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {problem.name} data ({meta['splits']}) to {out}")
    return 0


def cmd_search_loss(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        data = config_to_dict(cfg)
        data["stage1"].update(overrides)
        cfg = config_from_dict(data)
    out = _out_dir(cfg)
    problem = TestSplitGuard(_build_problem(cfg))
    result = run_stage1(problem, cfg, out)
    print(f"best genome (val {result.best_error:.6g}, "
          f"{len(result.trials)} trials, {result.n_stopped} stopped):")
    print(json.dumps(asdict(result.best_genome), indent=2, sort_keys=True))
    print(f"artifacts in {out}")
    return 0


def cmd_search_arch(args):
    cfg = load_config(args.config)
    data = config_to_dict(cfg)
    if args.space:
        data["space"] = _resolve_space(args.space)
    if args.strategy:
        data["stage2"]["strategy"] = args.strategy
    cfg = config_from_dict(data)
    genome = read_genome(args.loss) if args.loss else LossGenome()
    out = _out_dir(cfg)
    problem = TestSplitGuard(_build_problem(cfg))
    choices = run_stage2(problem, genome, cfg, out)
    with open(out / "best_arch.json", "w") as fh:
        json.dump(choices, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(choices, indent=2, sort_keys=True))
    print(f"artifacts in {out}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    genome = read_genome(args.genome) if args.genome else LossGenome()
    choices = (_load_choices(args.arch, cfg.space) if args.arch
               else default_choices(cfg.space))
    out = _out_dir(cfg)
    problem = _build_problem(cfg)
    net, result, evaluator = run_final(problem, genome, choices, cfg, out)
    summary = {"status": result.status, "epochs_run": result.epochs_run,
               "val_metric": result.final_val,
               "wall_clock": result.wall_clock}
    with open(out / "train_report.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.status != "ok":
        print(f"training diverged after {result.epochs_run} epochs",
              file=sys.stderr)
        return 3
    save_params(net, out / "weights")
    write_genome(genome, out / "genome.json")
    print(f"trained {cfg.space} for {result.epochs_run} epochs: "
          f"val {cfg.metric} {result.final_val:.6g}; weights in {out}")
    return 0


def cmd_evaluate(args):
    cfg = load_config(args.config)
    genome = read_genome(args.genome) if args.genome else LossGenome()
    choices = (_load_choices(args.arch, cfg.space) if args.arch
               else default_choices(cfg.space))
    problem = _build_problem(cfg)
    cin = problem.splits["train"].inputs.shape[1]
    net = build_network(cfg.space, choices, cin,
                        component_rng(cfg.seed, "final_net"),
                        grid_shape=problem.grid_shape)
    load_params(net, args.weights)
    evaluator = LossEvaluator(genome, problem)
    value = eval_metric(net, evaluator, args.split, cfg.metric)
    print(json.dumps({"split": args.split, "metric": cfg.metric,
                      "value": value}))
    return 0


def cmd_pipeline(args):
    cfg = load_config(args.config)
    report = two_stage_pipeline(cfg)
    print(f"pipeline done: test {report['metric']} = "
          f"{report['metrics']['test']:.6g} "
          f"(val {report['metrics']['val']:.6g})")
    print(f"report: {Path(cfg.out_dir) / 'report.json'}")
    return 0


def cmd_report(args):
    path = Path(args.run) / "report.json"
    report = load_report(path)
    lines = [
        f"problem:      {report['problem']}",
        f"space:        {report['space']} ({report['strategy']})",
        f"architecture: {json.dumps(report['architecture'], sort_keys=True)}",
        f"genome:       {json.dumps(report['genome'], sort_keys=True)}",
        f"val {report['metric']}:  {report['metrics']['val']:.6g}",
        f"test {report['metric']}: {report['metrics']['test']:.6g}",
        f"epochs run:   {report['epochs_run']}",
        f"wall clock:   {report['wall_clock']:.1f}s",
    ]
    print("\n".join(lines))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="picnn",
                                description="physics-informed network "
                                            "training and search")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(func=fn)
        return sp

    sp = add("generate-data", cmd_generate_data,
             help="write dataset splits as tensor files")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")

    sp = add("search-loss", cmd_search_loss,
             help="stage 1: loss-function search")
    sp.add_argument("--config", required=True)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--workers", type=int)

    sp = add("search-arch", cmd_search_arch,
             help="stage 2: architecture search")
    sp.add_argument("--config", required=True)
    sp.add_argument("--strategy", choices=("rl", "enas", "darts"))
    sp.add_argument("--space",
                    choices=sorted(SPACE_ALIASES) + sorted(SPACE_ALIASES.values()))
    sp.add_argument("--loss", help="frozen loss-genome JSON from stage 1")

    sp = add("train", cmd_train, help="train one architecture to completion")
    sp.add_argument("--config", required=True)
    sp.add_argument("--genome")
    sp.add_argument("--arch")

    sp = add("evaluate", cmd_evaluate, help="metric of saved weights on a split")
    sp.add_argument("--config", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--genome")
    sp.add_argument("--arch")
    sp.add_argument("--split", default="test",
                    choices=("train", "val", "test"))

    sp = add("pipeline", cmd_pipeline, help="full two-stage run")
    sp.add_argument("--config", required=True)

    sp = add("report", cmd_report, help="summarize a run directory")
    sp.add_argument("--run", required=True)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PipelineDiverged, SearchDiverged) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3
    except (TensorFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
