"""Command-line entry point: ``sugs cluster | simulate | evaluate``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import DEFAULT_BETA_VALUES, BetaGrid
from .bma import bma_coclustering, bma_variable_scores, model_weights, summarize, write_matrix_csv
from .conjugate import Hyperparameters
from .evaluate import (
    ScenarioSpec,
    adjusted_rand_index,
    correlated_component_spec,
    simulate,
    three_component_spec,
    variable_recovery,
)
from .scoring import select_best
from .varsel import SearchConfig, default_threads, full_search

log = logging.getLogger("sugs")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

# keys excluded from the config hash: they cannot change the results
NON_RESULT_KEYS = {"threads", "output", "input", "config", "command", "func", "verbose"}


class InputError(Exception):
    pass


def read_data_csv(path, id_column=None):
    """Numeric CSV with a mandatory header; returns ``(ids, names, data)``.

    The id column is ``id_column`` when given, otherwise a first column named
    ``id``; without one, ids are row numbers starting at 1.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise InputError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    if id_column is None and header[0].lower() == "id":
        id_column = header[0]
    id_idx = None
    if id_column is not None:
        if id_column not in header:
            raise InputError(f"{path}: id column {id_column!r} not in header")
        id_idx = header.index(id_column)
    value_cols = [j for j in range(len(header)) if j != id_idx]
    if not value_cols:
        raise InputError(f"{path}: no data columns")
    if len(rows) < 2:
        raise InputError(f"{path}: no data rows")
    ids, data = [], np.empty((len(rows) - 1, len(value_cols)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        ids.append(row[id_idx].strip() if id_idx is not None else str(r - 1))
        for c, j in enumerate(value_cols):
            try:
                v = float(row[j])
            except ValueError:
                raise InputError(f"{path}: row {r}, column {j + 1} ({header[j]!r}): not a number: {row[j]!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}: row {r}, column {j + 1} ({header[j]!r}): non-finite value {row[j]!r}")
            data[r - 2, c] = v
    return ids, [header[j] for j in value_cols], data


def standardize(data) -> np.ndarray:
    """Centre each column and scale to unit sample variance (``ddof=1``)."""
    sd = data.std(axis=0, ddof=1)
    sd[~(sd > 0)] = 1.0
    return (data - data.mean(axis=0)) / sd


def build_hyper(cfg: dict, data) -> Hyperparameters:
    n_vars = data.shape[1]
    if cfg["mu0"] == "mean":
        mu0 = data.mean(axis=0)
    else:
        mu0 = np.full(n_vars, float(cfg["mu0"]))
    if cfg["nu0"] == "n-variables":
        nu0 = float(n_vars)
    elif cfg["nu0"] == "per-variable":
        nu0 = 1.0
    else:
        nu0 = float(cfg["nu0"])
    return Hyperparameters(mu0=mu0, lambda0=cfg["lambda0"], nu0=nu0, s0=cfg["s0"])


def build_grid(cfg: dict) -> BetaGrid:
    values = [float(v) for v in cfg["beta_grid"]]
    if cfg["kappa"] == "uniform":
        return BetaGrid.uniform(values)
    return BetaGrid.from_gamma_prior(values, shape=cfg["kappa_shape"], rate=cfg["kappa_rate"])


def config_hash(cfg: dict) -> str:
    keep = {k: v for k, v in sorted(cfg.items()) if k not in NON_RESULT_KEYS}
    return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


def _dump_json(path, obj, indent=2) -> None:
    Path(path).write_text(json.dumps(obj, indent=indent, sort_keys=True) + "\n", encoding="utf-8")


def cmd_cluster(args) -> int:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    started = time.time()
    try:
        ids, names, data = read_data_csv(args.input, args.id_column)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.standardize:
        data = standardize(data)
    n, n_vars = data.shape
    if cfg["subsamples"] is None:
        cfg["subsamples"] = 2 * math.ceil(n_vars / 10)
    try:
        hyper = build_hyper(cfg, data)
        grid = build_grid(cfg)
        search = SearchConfig(
            n_subsamples=cfg["subsamples"],
            n_orderings=cfg["orderings"],
            n_iter=cfg["iterations"],
            p1_fraction=cfg["p1_fraction"],
            init_orderings=cfg["init_orderings"],
            prior_on=cfg["prior_on"],
            seed=cfg["seed"],
            threads=cfg["threads"],
            compute_pml=cfg["criterion"] == "pml",
            pml_mode=cfg["pml_mode"],
        )
        if not 0 < search.prior_on < 1 or search.n_iter < 1 or search.n_orderings < 1:
            raise ValueError("prior_on must lie in (0, 1); iterations and orderings must be >= 1")
        if cfg["window_k"] < 1:
            raise ValueError("window_k must be at least 1")
        models = full_search(data, search, hyper=hyper, beta_grid=grid)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    chash = config_hash(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if not models.models:
        _dump_json(out / "run_meta.json", {"seed": cfg["seed"], "config_hash": chash, "failures": models.failures})
        print("error: every model failed numerically", file=sys.stderr)
        return EXIT_NUMERICAL

    best = select_best(models.models, cfg["criterion"])
    best_idx = next(i for i, m in enumerate(models.models) if m is best)
    weights = model_weights(models.models, cfg["window_k"])
    s = bma_coclustering(models.models, weights)
    z_bma = summarize(s, cfg["cut_height"])
    f_bma = bma_variable_scores(models.models, weights)

    with open(out / "assignments.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "cluster"])
        for i, k in zip(ids, z_bma):
            writer.writerow([i, int(k) + 1])
    write_matrix_csv(out / "coclustering.csv", s, ids)
    with open(out / "variable_scores.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "gamma_best", "f_bma"])
        for name, g, f in zip(names, best.gamma, f_bma):
            writer.writerow([name, int(g), repr(float(f))])
    _dump_json(
        out / "models.json",
        {
            "seed": cfg["seed"],
            "config_hash": chash,
            "criterion": cfg["criterion"],
            "best": best_idx,
            "window": [int(i) for i in weights.window],
            "weights": [float(w) for w in weights.weights],
            "models": [m.to_dict() for m in models.models],
            "failures": models.failures,
        },
        indent=None,
    )
    _dump_json(
        out / "run_meta.json",
        {
            "seed": cfg["seed"],
            "config_hash": chash,
            "config": cfg,
            "n_observations": n,
            "n_variables": n_vars,
            "n_models": len(models.models),
            "n_failures": len(models.failures),
            "n_clusters_bma": int(z_bma.max()) + 1,
            "n_clusters_best": best.n_clusters,
            "wall_clock_seconds": time.time() - started,
            "versions": {
                "sugs": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        },
    )
    log.info("%d models, best log ML %.3f, %d BMA clusters", len(models.models), best.log_ml, z_bma.max() + 1)
    return EXIT_OK


SCENARIOS = {
    "wide-50": (100, 200, 0.5),
    "wide-25": (100, 200, 0.25),
    "wide-10": (100, 200, 0.10),
    "wide-5": (100, 200, 0.05),
    "tall-25": (1000, 100, 0.25),
    "tall-10": (1000, 100, 0.10),
    "tall-5": (1000, 100, 0.05),
}


def cmd_simulate(args) -> int:
    if args.scenario == "correlated":
        spec = correlated_component_spec(args.seed)
    elif args.scenario is not None:
        n, d, frac = SCENARIOS[args.scenario]
        spec = three_component_spec(n, d, frac, seed=args.seed)
    else:
        try:
            weights = [float(w) for w in args.weights.split(",")]
            centres = [float(c) for c in args.centres.split(",")]
            if len(centres) != len(weights):
                raise ValueError("need one centre per component")
            d_rel = args.d_relevant if args.d_relevant is not None else int(round(args.relevant_fraction * args.d_total))
            spec = ScenarioSpec(
                n=args.n,
                d_total=args.d_total,
                d_relevant=d_rel,
                weights=weights,
                means=[[c] * d_rel for c in centres],
                seed=args.seed,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    ds = simulate(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ds.save(out / "data.csv", out / "truth.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = Path(args.run)
    try:
        truth = json.loads(Path(args.truth).read_text(encoding="utf-8"))
        models = json.loads((run / "models.json").read_text(encoding="utf-8"))
        with open(run / "assignments.csv", newline="", encoding="utf-8") as fh:
            z_bma = [int(row["cluster"]) for row in csv.DictReader(fh)]
        meta = json.loads((run / "run_meta.json").read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    best = models["models"][models["best"]]
    true_z, true_gamma = truth["z"], truth["gamma"]
    rel, irr = variable_recovery(best["gamma"], true_gamma)
    metrics = {
        "ari_best": adjusted_rand_index(true_z, best["z"]),
        "ari_bma": adjusted_rand_index(true_z, z_bma),
        "correct_relevant": rel,
        "correct_irrelevant": irr,
        "n_clusters_best": best["n_clusters"],
        "n_clusters_bma": len(set(z_bma)),
        "wall_clock_seconds": meta.get("wall_clock_seconds"),
        "seed": models["seed"],
        "config_hash": models["config_hash"],
    }
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _threads_default() -> int:
    try:
        return default_threads()
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sugs", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="cluster a numeric CSV with variable selection and model averaging")
    c.add_argument("input")
    c.add_argument("-o", "--output", default="sugs_out")
    c.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    c.add_argument("--id-column")
    c.add_argument("--standardize", action="store_true")
    c.add_argument("--mu0", default="mean", help="'mean' or a number")
    c.add_argument("--lambda0", type=float, default=0.01)
    c.add_argument("--nu0", default="per-variable", help="'per-variable' (1), 'n-variables' or a number")
    c.add_argument("--s0", type=float, default=0.2)
    c.add_argument("--beta-grid", type=lambda s: [float(v) for v in s.split(",")], default=list(DEFAULT_BETA_VALUES))
    c.add_argument("--kappa", choices=["gamma", "uniform"], default="gamma")
    c.add_argument("--kappa-shape", type=float, default=1.0)
    c.add_argument("--kappa-rate", type=float, default=1.0)
    c.add_argument("--prior-on", type=float, default=0.5)
    c.add_argument("--iterations", type=int, default=2)
    c.add_argument("--subsamples", type=int, default=None, help="default: 2*ceil(D/10)")
    c.add_argument("--orderings", type=int, default=30)
    c.add_argument("--init-orderings", type=int, default=10)
    c.add_argument("--p1-fraction", type=float, default=0.1)
    c.add_argument("--criterion", choices=["ml", "pml"], default="ml")
    c.add_argument("--pml-mode", choices=["exact", "approx"], default="exact")
    c.add_argument("--window-k", type=float, default=20.0)
    c.add_argument("--cut-height", type=float, default=0.5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=_threads_default())
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("simulate", help="write a synthetic dataset and its truth")
    s.add_argument("-o", "--output", default="sim")
    s.add_argument("--scenario", choices=sorted(SCENARIOS) + ["correlated"])
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--d-total", type=int, default=200)
    s.add_argument("--d-relevant", type=int)
    s.add_argument("--relevant-fraction", type=float, default=0.5)
    s.add_argument("--weights", default="0.5,0.3,0.2")
    s.add_argument("--centres", default="0,2,-2")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="score a cluster run against the truth")
    e.add_argument("run")
    e.add_argument("truth")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_INPUT
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
