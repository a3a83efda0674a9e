"""Command-line runner.

    seaoco run CONFIG [--out DIR] [--threads N] [--seed S]
    seaoco verify SUITE [--out DIR] [--threads N] [--seed S]

A config is one TOML file with top-level keys ``name``, ``T`` (int or list),
``seeds`` and optionally ``seed``, ``out``, ``theorem``, ``dynamic``, plus the
tables ``[learner]``, ``[environment]``, ``[family]`` and ``[domain]``.
Exit codes: 0 success, 1 runtime failure or failed criterion, 2 invalid config.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math
from pathlib import Path
import sys

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

import numpy as np

from . import harness as H
from .environments import KINDS
from .geometry import GeometryError, domain_from_dict

FAMILIES = ("linear", "quadratic_tracking", "log_smooth")
TOP_KEYS = {"name", "T", "seeds", "seed", "out", "theorem", "dynamic", "learner", "environment", "family", "domain"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    name: str
    T: list
    seeds: int
    learner: dict
    environment: dict
    domain: dict
    family: dict = field(default_factory=lambda: {"kind": "quadratic_tracking"})
    seed: int = 0
    out: str = "out"
    theorem: str | None = None
    dynamic: bool = False

    def spec(self) -> H.ExperimentSpec:
        return H.ExperimentSpec(self.domain, self.environment, self.learner, self.family)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["theorem"] is None:
            del d["theorem"]
        return d


def _need(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _table(raw, key):
    v = raw.get(key)
    _need(isinstance(v, dict), key, "missing table" if v is None else "must be a table")
    return dict(v)


def validate(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - TOP_KEYS)
    _need(not unknown, unknown[0] if unknown else "", "unknown key")
    name = raw.get("name")
    _need(isinstance(name, str) and name and "/" not in name, "name", "must be a non-empty string without '/'")
    T = raw.get("T")
    Ts = T if isinstance(T, list) else [T]
    _need(all(isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in Ts) and Ts, "T",
          "must be a positive integer or a list of them")
    seeds = raw.get("seeds", 1)
    _need(isinstance(seeds, int) and not isinstance(seeds, bool) and seeds >= 1, "seeds", "must be a positive integer")
    seed = raw.get("seed", 0)
    _need(isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2 ** 64, "seed",
          "must be an unsigned 64-bit integer")
    learner = _table(raw, "learner")
    _need(learner.get("name") in H.LEARNERS, "learner.name",
          f"unknown learner {learner.get('name')!r} (choose from {', '.join(H.LEARNERS)})")
    env = _table(raw, "environment")
    _need(env.get("kind") in KINDS, "environment.kind", f"unknown environment {env.get('kind')!r}")
    dom = _table(raw, "domain")
    try:
        domain_from_dict(dom)
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from None
    fam = dict(raw.get("family", {"kind": "quadratic_tracking"}))
    _need(fam.get("kind") in FAMILIES, "family.kind", f"unknown loss family {fam.get('kind')!r}")
    theorem = raw.get("theorem")
    _need(theorem is None or theorem in H.THEOREMS, "theorem", f"unknown theorem tag {theorem!r}")
    dynamic = raw.get("dynamic", False)
    _need(isinstance(dynamic, bool), "dynamic", "must be a boolean")
    out = raw.get("out", "out")
    _need(isinstance(out, str), "out", "must be a string")
    return RunConfig(name, list(Ts), seeds, learner, env, dom, fam, seed, out, theorem, dynamic)


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax: {exc}") from None
    return validate(raw)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{path}: no such config file")
    return parse_config(p.read_text())


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# -- run ------------------------------------------------------------------------

def _chunk(args):
    cfg, T, seed, episodes, folder = args
    tr = H.run_batch(cfg.spec(), T, seed, episodes)
    for b, e in enumerate(episodes):
        H.write_trace_csv(tr, Path(folder) / f"{e}.csv", episode=b)
    reps = H.make_reports(tr, cfg.theorem, dynamic=cfg.dynamic)
    return [r.to_dict() for r in reps]


def run_experiment(cfg: RunConfig, out: Path, T: int, seed: int, threads: int, folder_name: str) -> dict:
    folder = out / folder_name
    folder.mkdir(parents=True, exist_ok=True)
    eps = list(range(cfg.seeds))
    jobs = [(cfg, T, seed, tuple(eps[i:i + H.CHUNK_EPISODES]), str(folder))
            for i in range(0, len(eps), H.CHUNK_EPISODES)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    reports = [r for p in parts for r in p]
    key = "dynamic_regret" if cfg.dynamic else "static_regret"
    vals = [r[key] for r in reports]
    summary = {"T": T, "seed": seed, "episodes": len(vals), "mean_regret": math.fsum(vals) / len(vals)}
    if len(vals) >= 2:
        est = H.mc_estimate(vals)
        summary.update(stderr=est.stderr, ci95=list(est.ci95))
    payload = {"config": cfg.to_dict(), "summary": summary, "reports": reports}
    H.write_report_json(payload, folder / "report.json")
    return summary


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.out)
    seed = cfg.seed if args.seed is None else args.seed
    try:
        if len(cfg.T) == 1:
            s = run_experiment(cfg, out, cfg.T[0], seed, args.threads, cfg.name)
            print(f"{cfg.name}: T={s['T']} mean regret {s['mean_regret']:.6g} over {s['episodes']} episodes")
            return 0
        rows = []
        for T in cfg.T:
            s = run_experiment(cfg, out, T, seed, args.threads, f"{cfg.name}_T{T}")
            rows.append(s)
            print(f"{cfg.name}: T={T} mean regret {s['mean_regret']:.6g}")
        pts = [(r["T"], r["mean_regret"]) for r in rows]
        summary = {"config": cfg.to_dict(), "sweep": rows}
        try:
            summary["rate_fit"] = H.rate_fit(pts)
            print(f"{cfg.name}: log-log slope {summary['rate_fit']:.4f}")
        except ValueError as exc:
            summary["rate_fit"] = None
            summary["rate_fit_error"] = str(exc)
        H.write_report_json(summary, out / cfg.name / "report.json")
        return 0
    except Exception as exc:  # noqa: BLE001
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def cmd_verify(args) -> int:
    from .experiments import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r} (choose from {', '.join(SUITES)})", file=sys.stderr)
        return 2
    seed = 0 if args.seed is None else args.seed
    try:
        results = run_suite(args.suite, seed=seed, threads=args.threads)
    except Exception as exc:  # noqa: BLE001
        print(f"verify failed: {exc}", file=sys.stderr)
        return 1
    for r in results:
        print(r.line())
        print(r.table())
        print()
    if args.out:
        H.write_report_json({"suite": args.suite, "seed": seed, "criteria": [r.to_dict() for r in results]},
                            Path(args.out) / f"verify_{args.suite}" / "report.json")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seaoco", description="Optimistic online learning simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run a configured experiment"), ("verify", "run an acceptance suite")):
        sp = sub.add_parser(name, help=helptext)
        if name == "run":
            sp.add_argument("config")
        else:
            sp.add_argument("suite")
        sp.add_argument("--out", default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be positive", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return cmd_run(args) if args.command == "run" else cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
