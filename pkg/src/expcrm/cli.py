"""Command-line harness: batch sampling, posterior updates, verification.

Subcommands
-----------

``families list``
    Print the catalog as JSON descriptors.
``posterior --model model.json --data data.jsonl --out posterior.json``
    Condition the configured prior on a file of observation records.
``sample-prior --model model.json [--rounds M] [--xmax X] [--reps R] [--seed S] --out draws.jsonl``
    Truncated draws of the trait measure itself, one JSON record per line.
``sample-marginal --model model.json --n N [--reps R] [--seed S] [--xmax X] --out data.jsonl [--summary summary.csv]``
    Observation sequences with the measure integrated out; the optional
    CSV summarizes each step with (rep, n, atoms_total, atoms_new,
    sum_counts).
``verify --model model.json [--suite assumptions|oracle|equivalence] [--seed S] [--reps R] [--report report.json]``
    Run one verification suite; exit 0 only if every check passes.

Exit codes: 0 success, 1 validation failure (bad hyperparameters, counts
outside support, truncation budget exceeded, failed verification), 2 I/O
failure (unreadable files, malformed JSON, schema violations).

Determinism: replicate ``r`` of any sampling command draws from the
stream ``RngState(seed, stream=r)``, so outputs are byte-identical for
identical (config, seed) no matter how replicates are scheduled.  Every
output file starts with a header record carrying the config hash, the
effective seed, and the truncation policy with its certificate; in CSV
files the header rides in a leading ``#`` comment line above the
mandatory column row.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import os
import sys

from .catalog import get_entry, list_entries
from .checks import run_suite
from .config import ModelConfig, model_config_from_dict, parse_model_config
from .errors import ConfigError, ExpCrmError
from .marginal import MarginalConfig, MarginalSampler
from .measures import (
    observation_from_jsonable,
    observation_to_jsonable,
    read_jsonl,
    trait_to_jsonable,
    write_jsonl,
)
from .posterior import posterior_update
from .rng import RngState
from .size_biased import SizeBiasedConfig, SizeBiasedSampler

__all__ = ["main"]

_POOL_THRESHOLD = 8  # below this many replicates the pool costs more than it saves


def _header(
    command: str, cfg: ModelConfig, seed: int, policy: dict, certificate: dict | None
) -> dict:
    """Provenance record embedded at the top of every output file.

    ``policy`` holds the truncation knobs actually in effect (flag
    overrides included), not necessarily what the config file said;
    ``certificate`` is the sampler's accounting of what the truncation
    neglected, when a sampler ran.
    """
    return {
        "kind": "header",
        "tool": "expcrm",
        "command": command,
        "config_sha256": cfg.config_hash(),
        "seed": seed,
        "truncation": {"policy": policy, "certificate": certificate},
    }


def _effective_seed(cfg: ModelConfig, args) -> int:
    return cfg.seed if args.seed is None else args.seed


# --- families ------------------------------------------------------------------


def _cmd_families(args) -> int:
    # make sure one negative binomial representative is instantiated, so
    # the listing always shows all four catalog pairs
    get_entry("negative_binomial", 1.0)
    seen = set()
    descriptors = []
    for entry in list_entries():
        desc = entry.describe()
        if desc["likelihood"] in seen:
            continue
        seen.add(desc["likelihood"])
        descriptors.append(desc)
    print(json.dumps(descriptors, indent=2))
    return 0


# --- posterior -----------------------------------------------------------------


def _cmd_posterior(args) -> int:
    cfg = parse_model_config(args.model)
    prior = cfg.build_prior()
    records = read_jsonl(args.data)
    observations = [
        observation_from_jsonable(rec)
        for rec in records
        if not (isinstance(rec, dict) and rec.get("kind") == "header")
    ]
    post = posterior_update(prior, observations)

    # the posterior block is itself a loadable model config
    model = {
        "likelihood": cfg.family,
        **({"r": cfg.r} if cfg.r is not None else {}),
        "prior": cfg.entry.prior_id,
        "params": {"mass": post.mass, "xi": list(post.xi), "lam": post.lam},
        "fixed_atoms": [
            {"loc": a.location.value, "xi": list(a.xi), "lam": a.lam}
            for a in post.fixed_atoms
        ],
        "truncation": cfg.to_jsonable()["truncation"],
        "seed": cfg.seed,
    }
    out = {
        "header": _header(
            "posterior",
            cfg,
            _effective_seed(cfg, args),
            cfg.to_jsonable()["truncation"],
            None,  # the update is exact; nothing was truncated
        ),
        "n_obs": post.n_obs,
        "model": model,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    return 0


# --- sample-prior ---------------------------------------------------------------

# worker-pool state: each process builds its sampler once, then maps
# replicate indices to records
_WORKER: dict = {}


def _init_prior_worker(cfg_dict: dict, m_max: int, x_max: int) -> None:
    cfg = model_config_from_dict(cfg_dict)
    sampler = SizeBiasedSampler(
        cfg.build_prior(),
        SizeBiasedConfig(m_max=m_max, x_max=x_max, eps_tail=cfg.eps_tail),
    )
    _WORKER["run"] = lambda seed, rep: _prior_record(sampler, seed, rep)


def _prior_record(sampler: SizeBiasedSampler, seed: int, rep: int) -> dict:
    measure = sampler.draw(RngState(seed, stream=rep))
    return {"rep": rep, **trait_to_jsonable(measure)}


def _init_marginal_worker(cfg_dict: dict, x_max: int, n_steps: int) -> None:
    cfg = model_config_from_dict(cfg_dict)
    sampler = MarginalSampler(
        cfg.build_prior(), MarginalConfig(x_max=x_max, eps_tail=cfg.eps_tail)
    )
    fixed = {a.location.value for a in sampler.prior.fixed_atoms}
    _WORKER["run"] = lambda seed, rep: _marginal_records(sampler, fixed, n_steps, seed, rep)


def _marginal_records(sampler, fixed_locs, n_steps, seed, rep):
    observations = sampler.sample(n_steps, RngState(seed, stream=rep))
    records = []
    summary = []
    seen = set(fixed_locs)
    for n, obs in enumerate(observations, start=1):
        records.append({"rep": rep, "n": n, **observation_to_jsonable(obs)})
        new = [a for a in obs.atoms if a.location.value not in seen]
        seen.update(a.location.value for a in obs.atoms)
        summary.append((rep, n, len(obs.atoms), len(new), obs.total_count()))
    return records, summary


def _pool_worker(task):
    seed, rep = task
    return _WORKER["run"](seed, rep)


def _fan_out(initializer, initargs, seed: int, reps: int) -> list:
    """Replicate results in index order, fanned across processes when worth it."""
    tasks = [(seed, rep) for rep in range(reps)]
    workers = min(os.cpu_count() or 1, reps)
    if reps < _POOL_THRESHOLD or workers < 2:
        initializer(*initargs)
        return [_pool_worker(t) for t in tasks]
    with multiprocessing.Pool(workers, initializer=initializer, initargs=initargs) as pool:
        return list(pool.imap(_pool_worker, tasks, chunksize=max(1, reps // (4 * workers))))


def _cmd_sample_prior(args) -> int:
    cfg = parse_model_config(args.model)
    rounds = cfg.rounds if args.rounds is None else args.rounds
    x_max = cfg.x_max if args.xmax is None else args.xmax
    seed = _effective_seed(cfg, args)
    # construct once up front: validates the model and prices the truncation
    sampler = SizeBiasedSampler(
        cfg.build_prior(), SizeBiasedConfig(m_max=rounds, x_max=x_max, eps_tail=cfg.eps_tail)
    )
    policy = {"rounds": rounds, "x_max": x_max, "eps_tail": cfg.eps_tail}
    header = _header("sample-prior", cfg, seed, policy, sampler.tail_certificate())
    header["reps"] = args.reps
    records = _fan_out(
        _init_prior_worker, (cfg.to_jsonable(), rounds, x_max), seed, args.reps
    )
    write_jsonl(args.out, [header, *records])
    return 0


# --- sample-marginal -------------------------------------------------------------


def _cmd_sample_marginal(args) -> int:
    cfg = parse_model_config(args.model)
    x_max = cfg.x_max if args.xmax is None else args.xmax
    seed = _effective_seed(cfg, args)
    sampler = MarginalSampler(
        cfg.build_prior(), MarginalConfig(x_max=x_max, eps_tail=cfg.eps_tail)
    )
    policy = {"x_max": x_max, "eps_tail": cfg.eps_tail}
    header = _header("sample-marginal", cfg, seed, policy, sampler.tail_certificate(args.n))
    header["reps"] = args.reps
    header["n"] = args.n
    results = _fan_out(
        _init_marginal_worker, (cfg.to_jsonable(), x_max, args.n), seed, args.reps
    )
    records = [rec for recs, _ in results for rec in recs]
    write_jsonl(args.out, [header, *records])
    if args.summary is not None:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            fh.write("# " + json.dumps(header, separators=(",", ":")) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rep", "n", "atoms_total", "atoms_new", "sum_counts"])
            for _, rows in results:
                writer.writerows(rows)
    return 0


# --- verify -----------------------------------------------------------------------


def _cmd_verify(args) -> int:
    cfg = parse_model_config(args.model)
    prior = cfg.build_prior()
    seed = _effective_seed(cfg, args)
    reports = run_suite(prior, args.suite, seed=seed, reps=args.reps)
    for report in reports:
        print(report)
    passed = all(r.passed for r in reports)
    if args.report is not None:
        out = {
            "header": _header("verify", cfg, seed, cfg.to_jsonable()["truncation"], None),
            "suite": args.suite,
            "reps": args.reps,
            "passed": passed,
            "reports": [r.to_jsonable() for r in reports],
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    return 0 if passed else 1


# --- parser -------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expcrm",
        description="Conjugate trait-measure models: sampling, posteriors, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fam = sub.add_parser("families", help="catalog information")
    fam.add_argument("action", choices=["list"], help="what to show")
    fam.set_defaults(func=_cmd_families)

    post = sub.add_parser("posterior", help="condition a model on observations")
    post.add_argument("--model", required=True, help="model config JSON")
    post.add_argument("--data", required=True, help="observations JSONL")
    post.add_argument("--out", required=True, help="posterior JSON to write")
    post.add_argument("--seed", type=_nonneg_int, default=None, help="override config seed")
    post.set_defaults(func=_cmd_posterior)

    sp = sub.add_parser("sample-prior", help="draw truncated trait measures")
    sp.add_argument("--model", required=True, help="model config JSON")
    sp.add_argument("--rounds", type=_positive_int, default=None, help="override truncation rounds")
    sp.add_argument("--xmax", type=_positive_int, default=None, help="override count cap")
    sp.add_argument("--reps", type=_positive_int, default=1, help="number of draws")
    sp.add_argument("--seed", type=_nonneg_int, default=None, help="override config seed")
    sp.add_argument("--out", required=True, help="draws JSONL to write")
    sp.set_defaults(func=_cmd_sample_prior)

    sm = sub.add_parser("sample-marginal", help="draw observation sequences")
    sm.add_argument("--model", required=True, help="model config JSON")
    sm.add_argument("--n", type=_positive_int, required=True, help="observations per replicate")
    sm.add_argument("--reps", type=_positive_int, default=1, help="number of replicates")
    sm.add_argument("--seed", type=_nonneg_int, default=None, help="override config seed")
    sm.add_argument("--xmax", type=_positive_int, default=None, help="override count cap")
    sm.add_argument("--out", required=True, help="observations JSONL to write")
    sm.add_argument("--summary", default=None, help="per-step summary CSV to write")
    sm.set_defaults(func=_cmd_sample_marginal)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("--model", required=True, help="model config JSON")
    ver.add_argument(
        "--suite",
        choices=["assumptions", "oracle", "equivalence"],
        default="assumptions",
        help="which checks to run",
    )
    ver.add_argument("--seed", type=_nonneg_int, default=None, help="override config seed")
    ver.add_argument("--reps", type=_positive_int, default=2000, help="Monte Carlo replicates")
    ver.add_argument("--report", default=None, help="report JSON to write")
    ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own diagnostics
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ExpCrmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
