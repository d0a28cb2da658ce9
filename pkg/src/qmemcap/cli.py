"""Command-line runner: ``qmemcap {capacity,lemmas,converse,inspect-channel}``.

Exit codes:
    0  success
    2  invalid configuration or arguments (including missing files)
    3  channel file failed validation
    4  a size cap was exceeded (for converse: every cell skipped)
    5  lemma suite found a violation
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .capacity import OptimizerConfig, product_capacity
from .channel import load_channel
from .coding import strong_converse_sweep, trend_summary
from .config import ExperimentConfig, load_config, resolve_channel_path
from .errors import CapExceededError, ConfigError, InvalidChannelError, QMemError
from .lemma_suite import run_suite
from .markov import mixing_length
from .operators import von_neumann_entropy

EXIT_OK, EXIT_CONFIG, EXIT_CHANNEL, EXIT_CAP, EXIT_VIOLATION = 0, 2, 3, 4, 5


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    """Deterministic text for a result value."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _write_csv(path: Path, cfg: ExperimentConfig, header: list, rows: list):
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()} seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(row[h]) for h in header])
    path.write_text(buf.getvalue())


def _write_json(path: Path, cfg: ExperimentConfig, payload: dict):
    doc = {"version": __version__, "seed": cfg.seed, "config_sha256": cfg.digest(), "config": cfg.to_dict()}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, frozenset):
        return sorted(x)
    raise TypeError(f"not serializable: {type(x)}")


def _channel(cfg: ExperimentConfig, config_path):
    try:
        path = resolve_channel_path(cfg, config_path)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from exc
    if not path.is_file():
        raise _Fail(EXIT_CONFIG, f"channel file not found: {path}")
    try:
        return load_channel(path)
    except InvalidChannelError as exc:
        raise _Fail(EXIT_CHANNEL, "channel validation failed:\n  " + "\n  ".join(exc.problems)) from exc
    except QMemError as exc:
        raise _Fail(EXIT_CHANNEL, f"channel validation failed: {exc}") from exc


def _abs_channel(cfg: ExperimentConfig, config_path) -> str:
    # recorded in sidecars so a replay does not depend on the working directory
    return str(resolve_channel_path(cfg, config_path).resolve())


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _optimizer(cfg: ExperimentConfig, restarts: int | None = None) -> OptimizerConfig:
    c = cfg.capacity
    return OptimizerConfig(
        restarts=restarts or c.restarts,
        max_iters=c.max_iters,
        tol=c.tol,
        ensemble_size=c.ensemble_size,
        seed=cfg.seed,
        threads=cfg.threads,
    )


def cmd_capacity(cfg: ExperimentConfig, config_path=None, **_) -> int:
    channel = _channel(cfg, config_path)
    c = cfg.capacity
    if channel.out_dim**c.n_max > c.max_output_dim:
        raise _Fail(EXIT_CAP, f"output dimension {channel.out_dim}^{c.n_max} exceeds max_output_dim={c.max_output_dim}")
    rows, details = [], []
    opt = _optimizer(cfg)
    for n in range(1, c.n_max + 1):
        est = product_capacity(channel, n, opt)
        rows.append(
            {
                "n": n,
                "chi_n": est.chi_n,
                "rate": est.rate,
                "restarts": len(est.restarts),
                "converged_restarts": est.converged_restarts,
                "optimizer_tol": c.tol,
            }
        )
        details.append({"n": n, "ensemble": est.ensemble.to_dict(), "restarts": est.restarts, "trace": est.optimizer_trace})
    out = _out_dir(cfg)
    header = ["n", "chi_n", "rate", "restarts", "converged_restarts", "optimizer_tol"]
    _write_csv(out / "capacity.csv", cfg, header, rows)
    _write_json(out / "capacity.json", cfg, {"estimates": details, "channel_path": _abs_channel(cfg, config_path)})
    print("n  chi_n           rate            converged  (lower bounds; optimizer tol %s)" % fmt(c.tol))
    for r in rows:
        print(f"{r['n']:<2} {fmt(r['chi_n']):<15} {fmt(r['rate']):<15} {r['converged_restarts']}/{r['restarts']}")
    return EXIT_OK


def cmd_lemmas(cfg: ExperimentConfig, entropy_fn: Callable | None = None, **_) -> int:
    records = run_suite(cfg.seed, cfg.lemmas, entropy_fn=entropy_fn)
    out = _out_dir(cfg)
    header = ["lemma", "instance_seed", "lhs", "rhs", "margin", "hypothesis_ok", "passed", "detail"]
    _write_csv(out / "lemmas.csv", cfg, header, [r.to_row() for r in records])
    summary: dict = {}
    for r in records:
        s = summary.setdefault(r.lemma, {"checks": 0, "violations": 0, "min_margin": float("inf")})
        s["checks"] += 1
        s["violations"] += int(not r.passed)
        s["min_margin"] = min(s["min_margin"], r.margin) if np.isfinite(r.margin) else s["min_margin"]
    bad = [r for r in records if not r.passed]
    _write_json(
        out / "lemmas.json",
        cfg,
        {"summary": summary, "violations": [dict(r.to_row(), instance=r.instance) for r in bad]},
    )
    for lemma, s in summary.items():
        status = "PASS" if s["violations"] == 0 else "FAIL"
        print(f"{status} {lemma:<20} checks={s['checks']:<5} violations={s['violations']:<4} min_margin={fmt(s['min_margin'])}")
    return EXIT_OK if not bad else EXIT_VIOLATION


def cmd_converse(cfg: ExperimentConfig, config_path=None, **_) -> int:
    channel = _channel(cfg, config_path)
    conv = cfg.converse
    ref = product_capacity(channel, conv.ref_n, _optimizer(cfg, conv.restarts))
    ref_rate = ref.rate
    if conv.ensemble_n == conv.ref_n:
        ensemble = ref.ensemble
    else:
        ensemble = product_capacity(channel, conv.ensemble_n, _optimizer(cfg, conv.restarts)).ensemble
    rates = list(conv.rates) if conv.rates is not None else [f * ref_rate for f in conv.rate_factors]
    result = strong_converse_sweep(
        channel,
        rates,
        list(conv.n_values),
        conv.trials,
        cfg.seed,
        ensemble,
        chi_rate_ref=ref_rate,
        threads=cfg.threads,
        cap=conv.max_entries,
    )
    out = _out_dir(cfg)
    header = ["rate", "n", "trial", "N", "max_error", "avg_error", "chi_rate_ref"]
    _write_csv(out / "converse.csv", cfg, header, [r.__dict__ for r in result.records])
    trends = [trend_summary(result, r) for r in rates]
    _write_json(
        out / "converse.json",
        cfg,
        {
            "chi_rate_ref": ref_rate,
            "channel_path": _abs_channel(cfg, config_path),
            "rates": rates,
            "skipped": [list(s) for s in result.skipped],
            "trends": [t.__dict__ for t in trends],
        },
    )
    print(f"reference rate chi^({conv.ref_n})/{conv.ref_n} = {fmt(ref_rate)} (lower bound)")
    for t in trends:
        errs = " ".join(fmt(round(e, 6)) for e in t.mean_errors)
        print(f"rate {fmt(t.rate)}: mean avg_error over n={list(t.n_values)}: {errs}; spearman={fmt(t.spearman)} sign={t.sign:+d} ({conv.trials} trials)")
    if result.skipped:
        print(f"skipped {len(result.skipped)} cells (partial results)")
    if not result.records:
        raise _Fail(EXIT_CAP, "every cell was skipped")
    return EXIT_OK


def cmd_inspect(cfg: ExperimentConfig, config_path=None, **_) -> int:
    channel = _channel(cfg, config_path)
    chain = channel.chain
    info = {
        "in_dim": channel.in_dim,
        "out_dim": channel.out_dim,
        "states": channel.n_states,
        "q": chain.q.tolist(),
        "gamma": chain.gamma.tolist(),
        "kraus_counts": [len(b.kraus_ops) for b in channel.branches],
        "mixing_length": {str(d): mixing_length(chain, d) for d in (0.5, 0.4, 0.3)},
        "branch_output_entropy_of_maximally_mixed": [
            von_neumann_entropy(b(np.eye(channel.in_dim) / channel.in_dim)) for b in channel.branches
        ],
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "capacity": cmd_capacity,
    "lemmas": cmd_lemmas,
    "converse": cmd_converse,
    "inspect-channel": cmd_inspect,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmemcap", description="Markov-memory quantum channel experiments.")
    p.add_argument("--version", action="version", version=f"qmemcap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML or JSON experiment config")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, help="worker threads (overrides config)")
        sp.add_argument("--channel", help="channel file (overrides config)")
    return p


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        updates["threads"] = args.threads
    if args.channel is not None:
        updates["channel_file"] = str(Path(args.channel).resolve())
    cfg = replace(cfg, **updates)
    if cfg.seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    return cfg


def main(argv=None, *, entropy_fn: Callable | None = None) -> int:
    """Entry point; ``entropy_fn`` replaces the entropy used by the continuity check (test hook)."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](cfg, config_path=args.config, entropy_fn=entropy_fn)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
