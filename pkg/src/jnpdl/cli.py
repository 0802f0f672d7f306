"""Command-line front end: synth, train, eval, eval-set, code, inspect.

Exit codes: 0 success, 1 validation error (bad inputs, files, config),
2 numerical failure.  All artifacts are written atomically, and a fixed
seed plus config reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .classification import (
    ClassifierParams,
    classify_sample,
    classify_set,
    lasso_code_projected,
)
from .coding import code_l2_batch
from .config import (
    CONFIG_KEYS,
    ExperimentConfig,
    build_config,
    parse_config_file,
)
from .datasets import from_arrays, generate_synthetic, load_dataset, save_dataset
from .errors import NumericalError, ValidationError
from .model_io import (
    atomic_write_text,
    coeffs_csv,
    load_model,
    read_header,
    save_metrics,
    save_model,
    save_trace,
)
from .training import train


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors: exit 1
        self.print_usage(sys.stderr)
        raise ValidationError(message)


_FLAG_HELP = {
    "s_p": "projected feature dimension",
    "q": "row split of the projection (default s_p // 2)",
    "atoms_per_class": "atom count per class: one integer or a comma list",
    "learn_projection": "set false to freeze the projection at initialization",
}


def _add_keys(parser, keys):
    for key in keys:
        parser.add_argument(f"--{key}", dest=key, type=_flag_parser(key),
                            default=None, help=_FLAG_HELP.get(key, ""), metavar="V")


def _flag_parser(key):
    caster = CONFIG_KEYS[key]

    def parse(text):
        try:
            return caster(text)
        except ValidationError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value {text!r} for {key}") from None

    return parse


_HYPER_KEYS = [
    "s_p", "q", "alpha1", "alpha2", "alpha3", "beta", "lambda1", "lambda2",
    "sigma", "k1", "k2", "k2_proj", "T", "T_pre", "tol", "seed",
    "atoms_per_class", "learn_projection", "coder_max_iters",
    "coder_max_sweeps", "coder_tol", "prox_tau", "trust_radius",
    "proj_iters", "epsilon_div",
]


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jnpdl",
                     description="Joint non-negative projection and dictionary learning")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_, keys):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--threads", dest="threads", type=int, default=None,
                       help="worker threads (1 = reference mode; higher values "
                            "currently run the same sequential path)")
        _add_keys(p, keys)
        return p

    command("synth", "generate a synthetic Gaussian-cluster dataset",
            ["classes", "per_class", "per_class_test", "dim", "separation",
             "correlation", "seed", "out_data", "out_test_data"])
    command("train", "train a model from a dataset CSV",
            [*_HYPER_KEYS, "data", "out_model", "out_trace"])
    command("eval", "classify single samples and write metrics JSON",
            ["data", "model", "out_metrics", "sigma", "lambda1", "lambda2"])
    command("eval-set", "classify frame sets by majority vote",
            ["data", "model", "out_metrics", "frames_per_set", "set_mode",
             "sigma", "lambda1", "lambda2"])
    command("code", "write coding coefficients for samples as CSV",
            ["data", "model", "out_coeffs", "mode", "lambda1", "lambda2"])
    command("inspect", "print the header of a model container", ["model"])
    return parser


def _config_from_args(args) -> ExperimentConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    flag_values = {k: v for k, v in vars(args).items()
                   if k in CONFIG_KEYS and v is not None}
    return build_config(file_values, flag_values)


def _metrics(true_labels, predicted, n_classes) -> dict:
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(true_labels, predicted):
        confusion[t - 1, p - 1] += 1
    totals = confusion.sum(axis=1)
    per_class = [
        (confusion[c, c] / totals[c]) if totals[c] else 0.0 for c in range(n_classes)
    ]
    accuracy = float(np.trace(confusion)) / max(1, confusion.sum())
    return {
        "accuracy": accuracy,
        "per_class": per_class,
        "confusion": confusion.tolist(),
    }


def run_synth(cfg: ExperimentConfig) -> None:
    classes = cfg.option("classes")
    per_class = cfg.option("per_class")
    per_test = cfg.option("per_class_test")
    out = cfg.require("out_data")
    dataset = generate_synthetic(
        classes, per_class + per_test, cfg.option("dim"),
        cfg.option("separation"), cfg.option("correlation"), cfg.hyper.seed,
    )
    if per_test > 0:
        test_out = cfg.require("out_test_data")
        train_idx, test_idx = [], []
        for sl in dataset.class_slices:
            cols = range(sl.start, sl.stop)
            train_idx.extend(cols[:per_class])
            test_idx.extend(cols[per_class:])
        save_dataset(from_arrays(dataset.features[:, train_idx],
                                 dataset.labels[train_idx]), out)
        save_dataset(from_arrays(dataset.features[:, test_idx],
                                 dataset.labels[test_idx]), test_out)
        print(f"wrote {len(train_idx)} training and {len(test_idx)} test samples")
    else:
        save_dataset(dataset, out)
        print(f"wrote {dataset.n_samples} samples to {out}")


def run_train(cfg: ExperimentConfig) -> None:
    dataset = load_dataset(cfg.require("data"))
    model = train(dataset, cfg.hyper)
    out_model = cfg.require("out_model")
    save_model(model, out_model)
    trace_path = cfg.option("out_trace")
    if trace_path:
        save_trace(model.objective_trace, trace_path)
    final = model.objective_trace[-1].total
    print(f"trained {len(model.objective_trace) - 1} iterations, "
          f"final objective {final:.6g}, model at {out_model}")


def _classifier_params(cfg: ExperimentConfig) -> ClassifierParams:
    return ClassifierParams(
        sigma=cfg.hyper.sigma,
        lambda1=cfg.hyper.lambda1,
        lambda2=cfg.hyper.lambda2,
        set_mode=cfg.option("set_mode"),
    )


def run_eval(cfg: ExperimentConfig) -> None:
    model = load_model(cfg.require("model"))
    dataset = load_dataset(cfg.require("data"))
    params = _classifier_params(cfg)
    predicted = [
        classify_sample(dataset.features[:, j], model, params)[0]
        for j in range(dataset.n_samples)
    ]
    metrics = _metrics(dataset.labels, predicted, model.dictionary.n_classes)
    _emit_metrics(cfg, metrics)


def run_eval_set(cfg: ExperimentConfig) -> None:
    model = load_model(cfg.require("model"))
    dataset = load_dataset(cfg.require("data"))
    params = _classifier_params(cfg)
    per_set = cfg.option("frames_per_set")
    if per_set < 1:
        raise ValidationError("frames_per_set must be positive")
    true_labels, predicted = [], []
    for c, sl in enumerate(dataset.class_slices):
        for start in range(sl.start, sl.stop, per_set):
            frames = dataset.features[:, start:min(start + per_set, sl.stop)]
            label, _ = classify_set(frames, model, params)
            true_labels.append(c + 1)
            predicted.append(label)
    metrics = _metrics(true_labels, predicted, model.dictionary.n_classes)
    _emit_metrics(cfg, metrics)


def _emit_metrics(cfg, metrics) -> None:
    out = cfg.option("out_metrics")
    if out:
        save_metrics(metrics, out)
    print(f"accuracy {metrics['accuracy']:.4f}" + (f", metrics at {out}" if out else ""))


def run_code(cfg: ExperimentConfig) -> None:
    model = load_model(cfg.require("model"))
    dataset = load_dataset(cfg.require("data"))
    mode = cfg.option("mode")
    if mode not in ("l1", "l2"):
        raise ValidationError(f"mode must be 'l1' or 'l2', got {mode!r}")
    params = _classifier_params(cfg)
    projected = model.projection.P @ dataset.features
    if mode == "l2":
        lam2 = params.lambda2
        if lam2 is None:
            lam2 = 0.001 * model.coding.coeffs.shape[1] / 700.0
        coeffs = code_l2_batch(projected, model.dictionary, lam2)
    else:
        cols = [
            lasso_code_projected(projected[:, j], model.dictionary, params.lambda1)
            for j in range(projected.shape[1])
        ]
        coeffs = np.stack(cols, axis=1)
    out = cfg.require("out_coeffs")
    atomic_write_text(out, coeffs_csv(coeffs))
    print(f"wrote {coeffs.shape[1]} coefficient rows to {out}")


def run_inspect(cfg: ExperimentConfig) -> None:
    header = read_header(cfg.require("model"))
    for key in ("s", "s_p", "q", "atoms", "classes", "samples"):
        print(f"{key}: {header[key]}")
    print("atoms_per_class: " + ",".join(str(v) for v in header["atoms_per_class"]))
    print("samples_per_class: " + ",".join(str(v) for v in header["samples_per_class"]))


_COMMANDS = {
    "synth": run_synth,
    "train": run_train,
    "eval": run_eval,
    "eval-set": run_eval_set,
    "code": run_code,
    "inspect": run_inspect,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
        _COMMANDS[args.command](cfg)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
