"""Command-line interface: validate / sample / effect / solve / sweep / report."""
from __future__ import annotations

import argparse
import csv
import os
import sys

import yaml

from . import configio, harness
from .effects import pce
from .scm import sample, validate


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fairmdp",
        description="Fairness-constrained decision making over structural causal models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check an SCM config for invariant violations")
    p_validate.add_argument("--config", required=True)

    p_sample = sub.add_parser("sample", help="draw a dataset from an SCM config")
    p_sample.add_argument("--config", required=True)
    p_sample.add_argument("--n", type=int, default=1000)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", default="out")

    p_effect = sub.add_parser("effect", help="estimate a path-specific counterfactual effect")
    p_effect.add_argument("--config", required=True)
    p_effect.add_argument("--seed", type=int, default=None)
    p_effect.add_argument("--out", default="out")

    p_solve = sub.add_parser("solve", help="solve an experiment config for a fair policy")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--out", default="out")

    p_sweep = sub.add_parser("sweep", help="solve across a grid of fairness thresholds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default="out")

    p_report = sub.add_parser("report", help="render a text summary of prior outputs")
    p_report.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "validate":
        model = configio.load_scm(args.config)
        problems = validate(model)
        if problems:
            for p in problems:
                print(p)
            return 1
        print("ok")
        return 0

    if args.command == "sample":
        model = configio.load_scm(args.config)
        problems = validate(model)
        if problems:
            raise ValueError("invalid model: " + "; ".join(problems))
        data = sample(model, args.n, args.seed)
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "samples.csv")
        columns = list(model.graph.node_ids)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            import numpy as np

            arrays = [np.broadcast_to(data[c], (args.n,)) for c in columns]
            for i in range(args.n):
                writer.writerow([repr(float(a[i])) for a in arrays])
        print(path)
        return 0

    if args.command == "effect":
        with open(args.config) as fh:
            raw = yaml.safe_load(fh)
        if "model" not in raw or "query" not in raw:
            raise ValueError(f"{args.config}: expected sections 'model' and 'query'")
        model_raw = raw["model"]
        if isinstance(model_raw, str):
            model = configio.load_scm(configio.resolve_path(args.config, model_raw))
        else:
            model = configio.scm_from_dict(model_raw, path=f"{args.config}.model")
        query = configio.query_from_dict(raw["query"], path=f"{args.config}.query")
        if args.seed is not None and not isinstance(query.estimator, configio.Exact):
            import dataclasses

            query = dataclasses.replace(
                query, estimator=dataclasses.replace(query.estimator, seed=args.seed)
            )
        estimate = pce(model, query)
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "effect.json")
        harness.dump_json(
            {
                "value": estimate.value,
                "transformed_value": query.apply_transform(estimate.value),
                "standard_error": estimate.standard_error,
                "samples_used": estimate.samples_used,
                "query": configio.query_to_dict(query),
            },
            path,
        )
        print(path)
        return 0

    if args.command == "solve":
        config = configio.load_experiment(args.config)
        harness.run_experiment(config, args.out, seed=args.seed)
        print(os.path.join(args.out, "solve.json"))
        return 0

    if args.command == "sweep":
        config = configio.load_experiment(args.config)
        if args.seed is not None:
            import dataclasses

            config = dataclasses.replace(config, seed=args.seed)
        report = harness.sweep(config)
        os.makedirs(args.out, exist_ok=True)
        harness.dump_json(report, os.path.join(args.out, "sweep.json"))
        harness.sweep_to_csv(report, os.path.join(args.out, "sweep.csv"))
        print(os.path.join(args.out, "sweep.json"))
        return 0

    if args.command == "report":
        print(harness.render_report(args.out))
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
