"""``quenchmap`` command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, set_value
from .data import fit_preprocessing, load_csv, write_csv
from .encoding import encode_sample, fit_couplings, format_couplings, write_instance
from .evaluation import (fit_predict, inner_splits, parameter_grid,
                         run_experiment, select_params)
from .features import QuenchCache, map_dataset
from .ml import compute_metrics, gbt_train, gram_linear, svm_train
from .oracles import run_oracle_checks

SUBCOMMANDS = ("preprocess", "encode", "map", "train", "evaluate", "sweep", "oracle")

OVERRIDES = {
    "dt_ns": "quench.dt_ns",
    "shots": "quench.shots",
    "seed": "quench.seed",
    "top_k": "preprocess.top_k",
    "corr_threshold": "encoding.corr_threshold",
    "max_degree": "encoding.max_degree",
    "jobs": "output.jobs",
    "out": "output.out_dir",
    "schedule": "quench.schedule",
    "gamma0": "quench.gamma0",
    "beta0": "quench.beta0",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _tau_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tau-ns", type=_tau_list, help="anneal time(s) in ns, comma separated")
    common.add_argument("--dt-ns", type=float)
    common.add_argument("--shots", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--top-k", type=int)
    common.add_argument("--corr-threshold", type=float)
    common.add_argument("--max-degree", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--schedule", help="'linear' or 'file:<path>'")
    common.add_argument("--gamma0", type=float)
    common.add_argument("--beta0", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="quenchmap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.add_parser("preprocess", parents=[common], help="impute, scale and select features")
    sub.add_parser("encode", parents=[common], help="write couplings and per-sample Ising instances")
    sub.add_parser("map", parents=[common], help="write the quantum-feature dataset")
    train = sub.add_parser("train", parents=[common], help="fit one model on a CSV")
    train.add_argument("--model", choices=("svm", "gbt"), required=True)
    train.add_argument("--input", help="CSV to train on (default: the preprocessed config dataset)")
    train.add_argument("--label-column", default="label")
    sub.add_parser("evaluate", parents=[common], help="cross-validate at a single anneal time")
    sub.add_parser("sweep", parents=[common], help="cross-validate over the configured anneal times")
    oracle = sub.add_parser("oracle", parents=[common], help="run simulator cross-checks")
    oracle.add_argument("--n", type=int, default=4)
    return parser


def effective_config(args) -> ExperimentConfig:
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read config: {err}") from None
    for attr, dotted in OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            set_value(config, dotted, value)
    if args.tau_ns:
        config.quench.tau_list = args.tau_ns
    return config.validate()


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.dump(out / "effective_config.yaml")
    return out


def _need_dataset(config: ExperimentConfig):
    if not config.dataset.path:
        raise UsageError("this command needs dataset.path in --config")
    return load_csv(config.dataset.path, config.dataset.label_column)


def cmd_preprocess(config, args) -> int:
    out = _out_dir(config)
    data = _need_dataset(config)
    p = config.preprocess
    processed, report = fit_preprocessing(data, p.top_k, p.mi_threshold, p.n_bins)
    write_csv(out / "preprocessed.csv", processed)
    report.save(out / "preprocess_report.json")
    print(f"{processed.shape[1]} of {data.shape[1]} columns kept -> {out / 'preprocessed.csv'}")
    return 0


def _encoded(config):
    data = _need_dataset(config)
    p, e = config.preprocess, config.encoding
    processed, _ = fit_preprocessing(data, p.top_k, p.mi_threshold, p.n_bins)
    couplings = fit_couplings(processed.values, e.corr_threshold, e.max_degree,
                              e.coupling_scale, e.j_max)
    return processed, couplings


def cmd_encode(config, args) -> int:
    out = _out_dir(config)
    processed, couplings = _encoded(config)
    (out / "couplings.txt").write_text(format_couplings(couplings), encoding="utf-8")
    inst_dir = out / "instances"
    inst_dir.mkdir(exist_ok=True)
    for r, x in enumerate(processed.values):
        write_instance(inst_dir / f"row{r:05d}.txt", encode_sample(x, couplings, config.encoding.h_max))
    print(f"n={couplings.n} qubits, {len(couplings.edges)} couplings, {processed.shape[0]} instances -> {out}")
    return 0


def cmd_map(config, args) -> int:
    out = _out_dir(config)
    processed, couplings = _encoded(config)
    tau = config.quench.tau_list[0]
    cache = QuenchCache.from_env(config.output.cache_dir)
    mapped = map_dataset(processed.values, processed.labels, couplings, config.quench_config(tau),
                         config.quench.include_zz, config.encoding.h_max, cache)
    mapped.write(out / "mapped.csv")
    print(f"{mapped.features.shape[0]} x {mapped.features.shape[1]} quantum features "
          f"(tau={tau} ns) -> {out / 'mapped.csv'}")
    return 0


def cmd_train(config, args) -> int:
    out = _out_dir(config)
    if args.input:
        data = load_csv(args.input, args.label_column)
        x, y = data.values, data.labels
    else:
        processed, _ = _encoded(config)
        x, y = processed.values, processed.labels
    grid = parameter_grid(config.models.get(args.model, {}))
    params = select_params(args.model, grid, x, y, inner_splits(config, y, config.cv.seed))
    if args.model == "svm":
        model = svm_train(gram_linear(x), y, C=float(params.get("C", 1.0)))
    else:
        model = gbt_train(x, y, n_trees=int(params.get("n_trees", 100)),
                          max_depth=int(params.get("max_depth", 3)),
                          learning_rate=float(params.get("learning_rate", 0.1)))
    model.save(out / f"{args.model}_model.json")
    scores, labels = fit_predict(args.model, params, x, y, x)
    report = compute_metrics(y, labels, scores)
    print(json.dumps({"model": args.model, "params": params, "train_metrics": report.as_dict()}))
    return 0


def _print_summary(result, config) -> None:
    for tau in config.quench.tau_list:
        for model in config.models:
            raw = result.median(tau, model, "raw")
            mapped = result.median(tau, model, "aqfm")
            print(f"tau={tau:8.3f} ns  {model:4s}  median balanced accuracy raw={raw:.3f} "
                  f"aqfm={mapped:.3f}  (IQR {result.iqr(tau, model):.3f})")


def cmd_evaluate(config, args) -> int:
    config.quench.tau_list = config.quench.tau_list[:1] if not args.tau_ns else args.tau_ns[:1]
    return cmd_sweep(config, args)


def cmd_sweep(config, args) -> int:
    out = _out_dir(config)
    data = _need_dataset(config)
    result = run_experiment(config, data, out)
    _print_summary(result, config)
    print(f"results -> {out / 'folds.csv'}, {out / 'summary.csv'}")
    return 0


def cmd_oracle(config, args) -> int:
    seed = args.seed if args.seed is not None else 0
    checks = run_oracle_checks(args.n, seed)
    for check in checks:
        print(check.line())
    ok = all(c.passed for c in checks)
    print("all oracle checks passed" if ok else "ORACLE CHECKS FAILED")
    return 0 if ok else 2


COMMANDS = {
    "preprocess": cmd_preprocess, "encode": cmd_encode, "map": cmd_map, "train": cmd_train,
    "evaluate": cmd_evaluate, "sweep": cmd_sweep, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            raise UsageError(parser.format_help())
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = effective_config(args)
        return COMMANDS[args.command](config, args)
    except UsageError as err:
        print(str(err).rstrip(), file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return int(err.code or 0)
    except Exception as err:  # noqa: BLE001
        print(f"quenchmap: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
