"""``graphtax`` command line.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime/numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import GENERATORS, RunConfig, generate
from .data.tu import load_dir, write_tu
from .errors import GraphtaxError, InputError
from .harness import TrainConfig, run_protocol
from .models import ModelConfig, ModelKind
from .perturb import CANONICAL_SUITE, Kind, Perturbation, SeedPolicy, apply, parse_suite
from .profiler import cluster_profiles, compute_profiles, export, read_profiles_csv, write_profiles_csv


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--folds", type=int)
    g.add_argument("--repetitions", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--dtype", choices=["float32", "float64"])
    g.add_argument("--workers", type=int, help="parallel training jobs (default: $GRAPHTAX_WORKERS or 1)")
    m = p.add_argument_group("model")
    m.add_argument("--hidden-dim", type=int)
    m.add_argument("--heads", type=int, dest="gat_heads")
    m.add_argument("--cheb-k", type=int)
    m.add_argument("--dropout", type=float)


def _train_config(args, base: TrainConfig = TrainConfig()) -> TrainConfig:
    return base.with_overrides(
        epochs=args.epochs, patience=args.patience, batch_size=args.batch_size, lr=args.lr,
        folds=args.folds, repetitions=args.repetitions, seed=args.seed, dtype=args.dtype,
    )


def _model_config(kind: str, args, base: Optional[ModelConfig] = None) -> ModelConfig:
    base = base or ModelConfig(kind=kind)
    return base.with_overrides(hidden_dim=args.hidden_dim, gat_heads=args.gat_heads,
                               cheb_k=args.cheb_k, dropout=args.dropout)


def _perturbation(name: str, k: Optional[int], policy: Optional[str]) -> Perturbation:
    if name == Kind.FRAGMENTED.value:
        if k is None:
            raise InputError("--kind fragmented needs --k")
        return Perturbation(Kind.FRAGMENTED, k, SeedPolicy(policy or SeedPolicy.LOWEST_ID))
    p = Perturbation.parse(name)
    if policy and p.kind is Kind.FRAGMENTED:
        p = Perturbation(Kind.FRAGMENTED, p.k, SeedPolicy(policy))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphtax", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--kind", required=True, choices=GENERATORS)
    g.add_argument("--n-graphs", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--blocks", type=int, dest="num_blocks")
    g.add_argument("--block-min", type=int, dest="block_size_min")
    g.add_argument("--block-max", type=int, dest="block_size_max")
    g.add_argument("--p", type=float)
    g.add_argument("--q", type=float)
    g.add_argument("--labeled-fraction", type=float)
    g.add_argument("--out", required=True)

    pt = sub.add_parser("perturb", help="apply one perturbation to a dataset")
    pt.add_argument("--in", dest="input", required=True)
    pt.add_argument("--kind", required=True,
                    help="identity, no-node-features, node-degree, no-edges, fully-connected, fragmented")
    pt.add_argument("--k", type=int)
    pt.add_argument("--seed-policy", choices=[s.value for s in SeedPolicy])
    pt.add_argument("--out", required=True)

    r = sub.add_parser("run", help="evaluate one dataset x model x perturbation")
    r.add_argument("--dataset", required=True)
    r.add_argument("--model", default="gcn", choices=[m.value for m in ModelKind])
    r.add_argument("--perturbation", default="identity")
    r.add_argument("--seed-policy", choices=[s.value for s in SeedPolicy])
    r.add_argument("--log", help="append per-run JSON lines here")
    _train_flags(r)

    pr = sub.add_parser("profile", help="sensitivity profiles over a perturbation suite")
    pr.add_argument("--dataset", required=True, action="append")
    pr.add_argument("--model", action="append", choices=[m.value for m in ModelKind])
    pr.add_argument("--suite", help="comma-separated perturbation names (default: canonical suite)")
    pr.add_argument("--margin", type=float, default=0.02)
    pr.add_argument("--log")
    pr.add_argument("--out", required=True, help="profiles CSV path")
    _train_flags(pr)

    t = sub.add_parser("taxonomy", help="cluster profiles into a taxonomy")
    t.add_argument("--profiles", required=True)
    t.add_argument("--clusters", type=int, default=4)
    t.add_argument("--model", help="select one model when the CSV holds several")
    t.add_argument("--out", required=True)

    a = sub.add_parser("all", help="end-to-end run from a JSON config")
    a.add_argument("--config", required=True)
    a.add_argument("--out")
    a.add_argument("--clusters", type=int)
    _train_flags(a)
    return parser


def cmd_gen(args) -> int:
    params = {"n_graphs": args.n_graphs, "seed": args.seed}
    if args.name:
        params["name"] = args.name
    if args.kind == "sbm-cluster":
        for key in ("num_blocks", "block_size_min", "block_size_max", "p", "q", "labeled_fraction"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
    ds = generate(args.kind, params)
    write_tu(ds, args.out)
    print(f"wrote {ds.name} ({len(ds)} graphs) to {args.out}")
    return 0


def cmd_perturb(args) -> int:
    ds = load_dir(args.input)
    p = _perturbation(args.kind, args.k, args.seed_policy)
    write_tu(apply(p, ds), args.out)
    print(f"wrote {p.name} of {ds.name} to {args.out}")
    return 0


def cmd_run(args) -> int:
    ds = load_dir(args.dataset)
    p = _perturbation(args.perturbation, None, args.seed_policy)
    mc = _model_config(args.model, args)
    res = run_protocol(apply(p, ds), mc, _train_config(args), workers=args.workers,
                       log_path=args.log, perturbation=p.name)
    out = {"dataset": ds.name, "model": mc.kind.value, "perturbation": p.name, **res.to_dict()}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_profile(args) -> int:
    datasets = [load_dir(d) for d in args.dataset]
    models = [_model_config(m, args) for m in (args.model or ["gcn"])]
    suite = parse_suite(args.suite.split(",")) if args.suite else CANONICAL_SUITE
    profiles = compute_profiles(datasets, models, _train_config(args), suite, workers=args.workers,
                                margin=args.margin, log_path=args.log)
    write_profiles_csv(profiles, args.out)
    print(f"wrote {len(profiles)} profiles to {args.out}")
    return 0


def _taxonomies(profiles, n_clusters, out: Path, per_model_dirs: bool):
    models = sorted({p.model for p in profiles})
    written = []
    for model in models:
        subset = [p for p in profiles if p.model == model]
        tax = cluster_profiles(subset, min(n_clusters, len(subset)))
        target = out / model if per_model_dirs else out
        export(tax, subset, target, profiles_csv=None)
        written.append(target)
    return written


def cmd_taxonomy(args) -> int:
    profiles = read_profiles_csv(args.profiles)
    if args.model:
        profiles = [p for p in profiles if p.model == args.model]
        if not profiles:
            raise InputError(f"no profiles for model {args.model!r}")
    if len({p.model for p in profiles}) > 1:
        raise InputError("profiles CSV holds several models; choose one with --model")
    tax = cluster_profiles(profiles, args.clusters)
    paths = export(tax, profiles, args.out, profiles_csv=None)
    print(f"wrote {paths['taxonomy']} and {paths['heatmap']}")
    return 0


def cmd_all(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    train = _train_config(args, cfg.train).with_overrides(seed=cfg.seed if args.seed is None else args.seed)
    out = Path(args.out) if args.out else cfg.output
    n_clusters = args.clusters or cfg.n_clusters
    models = [_model_config(m.kind.value, args, m) for m in cfg.models]
    datasets = [ref.load() for ref in cfg.datasets]
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "runs.jsonl"
    log_path.unlink(missing_ok=True)
    profiles = compute_profiles(datasets, models, train, cfg.suite, workers=cfg.effective_workers(args.workers),
                                margin=cfg.margin, log_path=log_path)
    write_profiles_csv(profiles, out / "profiles.csv")
    dirs = _taxonomies(profiles, n_clusters, out, per_model_dirs=True)
    print(f"wrote {out / 'profiles.csv'}, {log_path} and taxonomies in {', '.join(map(str, dirs))}")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "perturb": cmd_perturb,
    "run": cmd_run,
    "profile": cmd_profile,
    "taxonomy": cmd_taxonomy,
    "all": cmd_all,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"graphtax: error: {exc}", file=sys.stderr)
        return 1
    except GraphtaxError as exc:
        print(f"graphtax: failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"graphtax: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
