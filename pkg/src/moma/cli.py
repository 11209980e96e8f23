"""Command-line front end.

Configuration files hold ``key = value`` lines (``#`` starts a comment).
Absent keys take their defaults; command-line flags override file values.

Run keys: algorithm, N_A, N_I, p_M, p_C, N_CP, delta_r, delta_c, eps_kind,
eps_hi, eps_lo, eps_t_start, eps_t_end, max_flips, counter_mode, seed,
threads, soga_k, soga_budget, max_evaluations, max_perturbations, archive,
memoize, negate_assignment.
Problem keys: problem (lotz | knapsack | resonator | resonator_size),
problem_seed, n, nx, ny, Z0.
Experiment keys: out, reps, algorithms (comma separated), oracle (front CSV).

The default worker count comes from the ``MOMA_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import ALGORITHMS, RunConfig, run_batch, write_rows_csv
from .errors import ConfigurationError, MomaError
from .metrics import generational_distance, hypervolume, read_front_csv
from .problems import PROBLEMS, instance_from_descriptor

log = logging.getLogger("moma")

THREADS_ENV = "MOMA_THREADS"


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


# key -> (parser, human-readable accepted range)
RUN_KEYS = {
    "algorithm": (str, "one of " + ", ".join(ALGORITHMS)),
    "N_A": (int, "integer >= 2"),
    "N_I": (int, "integer >= 0"),
    "p_M": (float, "real in [0, 1]"),
    "p_C": (float, "real in [0, 1]"),
    "N_CP": (int, "integer >= 1"),
    "delta_r": (float, "real in [0, 1]"),
    "delta_c": (float, "real in [0, 1]"),
    "eps_kind": (str, "taper or constant"),
    "eps_hi": (float, "real >= eps_lo"),
    "eps_lo": (float, "real in [0, eps_hi]"),
    "eps_t_start": (int, "integer >= 1"),
    "eps_t_end": (int, "integer > eps_t_start"),
    "max_flips": (int, "integer >= 1"),
    "counter_mode": (str, "accepted or evaluations"),
    "seed": (int, "integer"),
    "threads": (int, "integer >= 1"),
    "soga_k": (int, "integer >= 2"),
    "soga_budget": (str, "full or shared"),
    "max_evaluations": (_opt_int, "integer or none"),
    "max_perturbations": (_opt_int, "integer or none"),
    "archive": (str, "optima or trajectory"),
    "memoize": (_bool, "true or false"),
    "negate_assignment": (_bool, "true or false"),
}
PROBLEM_KEYS = {
    "problem": (str, "one of " + ", ".join(PROBLEMS)),
    "problem_seed": (int, "integer"),
    "n": (int, "integer >= 1"),
    "nx": (int, "integer >= 1"),
    "ny": (int, "integer >= 1"),
    "Z0": (float, "real > 0"),
}
EXPERIMENT_KEYS = {
    "out": (str, "directory path"),
    "reps": (int, "integer >= 1"),
    "algorithms": (str, "comma-separated subset of " + ", ".join(ALGORITHMS)),
    "oracle": (str, "path to a front CSV"),
}
ALL_KEYS = {**RUN_KEYS, **PROBLEM_KEYS, **EXPERIMENT_KEYS}


@dataclass
class ExperimentSpec:
    config: RunConfig = field(default_factory=RunConfig)
    out: str = "moma_out"
    reps: int = 1
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    oracle: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigurationError("reps: accepted range is integer >= 1")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigurationError(f"algorithms: accepted range is {EXPERIMENT_KEYS['algorithms'][1]}")


def _cast(key: str, text: str):
    if key not in ALL_KEYS:
        raise ConfigurationError(f"unknown key {key!r}; accepted keys: {', '.join(ALL_KEYS)}")
    caster, accepted = ALL_KEYS[key]
    try:
        return caster(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {text!r}; accepted range is {accepted}") from None


def spec_from_mapping(values: dict) -> ExperimentSpec:
    """Validated spec from already-typed key values; defaults fill the gaps."""
    for key in values:
        if key not in ALL_KEYS:
            raise ConfigurationError(f"unknown key {key!r}; accepted keys: {', '.join(ALL_KEYS)}")
    run = {k: v for k, v in values.items() if k in RUN_KEYS}
    problem = {"name": values.get("problem", "lotz"), "seed": values.get("problem_seed", 0)}
    for key in ("n", "nx", "ny", "Z0"):
        if key in values:
            problem[key] = values[key]
    if problem["name"] not in PROBLEMS:
        raise ConfigurationError(f"problem: accepted range is {PROBLEM_KEYS['problem'][1]}")
    if problem["name"] in ("lotz", "knapsack") and "n" not in problem:
        problem["n"] = 16 if problem["name"] == "lotz" else 20
    try:
        cfg = RunConfig(problem=problem, **run)
    except ConfigurationError as exc:
        key = str(exc).split(":")[0]
        accepted = ALL_KEYS.get(key, (None, ""))[1]
        raise ConfigurationError(f"{exc}; accepted range is {accepted}" if accepted else str(exc)) from None
    algorithms = values.get("algorithms")
    if isinstance(algorithms, str):
        algorithms = [a.strip() for a in algorithms.split(",") if a.strip()]
    return ExperimentSpec(cfg, values.get("out", "moma_out"), values.get("reps", 1),
                          algorithms or [cfg.algorithm], values.get("oracle"))


def parse_config_text(text: str) -> ExperimentSpec:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive (N_A vs n)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    values = {k: _cast(k, v) for k, v in parser["run"].items()}
    return spec_from_mapping(values)


def parse_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file {path} not found")
    return parse_config_text(path.read_text())


def spec_to_mapping(spec: ExperimentSpec) -> dict:
    cfg = spec.config
    out = {k: getattr(cfg, k) for k in RUN_KEYS}
    prob = dict(cfg.problem)
    out["problem"] = prob.pop("name")
    out["problem_seed"] = prob.pop("seed", 0)
    out.update(prob)
    out.update(out=spec.out, reps=spec.reps, algorithms=",".join(spec.algorithms))
    if spec.oracle is not None:
        out["oracle"] = spec.oracle
    return out


def echo_config(spec: ExperimentSpec) -> str:
    """The spec in configuration-file syntax; parsing it back gives the same spec."""
    lines = []
    for key, val in spec_to_mapping(spec).items():
        if val is None:
            val = "none"
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def _apply_flags(spec: ExperimentSpec, args) -> ExperimentSpec:
    values = spec_to_mapping(spec)
    if args.algorithm:
        values["algorithm"] = args.algorithm
        values["algorithms"] = args.algorithm
    if args.seed is not None:
        values["seed"] = args.seed
    if args.reps is not None:
        values["reps"] = args.reps
    if args.out is not None:
        values["out"] = args.out
    if args.threads is not None:
        values["threads"] = args.threads
    elif args.config is None or "threads" not in _file_keys(args.config):
        env = os.environ.get(THREADS_ENV)
        if env:
            values["threads"] = _cast("threads", env)
    return spec_from_mapping(values)


def _file_keys(path) -> set:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[run]\n" + Path(path).read_text())
    return set(parser["run"])


def _load_spec(args) -> ExperimentSpec:
    spec = parse_config(args.config) if args.config else ExperimentSpec()
    return _apply_flags(spec, args)


def _oracle_front(spec: ExperimentSpec):
    if spec.oracle:
        return read_front_csv(spec.oracle).objectives
    return None


def _batch(spec: ExperimentSpec, algorithm: str, out: Path) -> dict:
    cfg = spec.config.replace(algorithm=algorithm)
    problem = instance_from_descriptor(cfg.problem)
    oracle = _oracle_front(spec)
    if oracle is not None:
        problem.true_front = lambda: oracle  # type: ignore[method-assign]
    return run_batch(cfg, spec.reps, out, problem)


def cmd_run(spec: ExperimentSpec) -> int:
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(echo_config(spec))
    res = _batch(spec, spec.config.algorithm, out)
    failed = [r for r in res["runs"] if r["status"] != "ok"]
    for row in res["summary"]:
        print(f"{row['metric']:>14}: mean {row['mean']:.6g}  best {row['best']:.6g}  worst {row['worst']:.6g}")
    return 1 if failed else 0


def cmd_compare(spec: ExperimentSpec) -> int:
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(echo_config(spec))
    runs, summary, failed = [], [], 0
    for alg in spec.algorithms:
        res = _batch(spec, alg, out)
        runs.extend(res["runs"])
        summary.extend({"algorithm": alg, **row} for row in res["summary"])
        failed += sum(r["status"] != "ok" for r in res["runs"])
    write_rows_csv(runs, out / "compare_runs.csv")
    write_rows_csv(summary, out / "compare_summary.csv")
    for row in summary:
        print(f"{row['algorithm']:>8} {row['metric']:>14}: mean {row['mean']:.6g}")
    return 1 if failed else 0


def cmd_metrics(fronts: list[str], oracle: str | None, reference=None, out: str | None = None) -> int:
    """GD (when an oracle is given), HV (when a reference is given) and N_nd per front file."""
    G_true = read_front_csv(oracle).objectives if oracle else None
    rows = []
    for path in fronts:
        F = read_front_csv(path).objectives
        row = {"file": path, "n_nd": len(F)}
        row["gd"] = generational_distance(F, G_true) if G_true is not None else float("nan")
        row["hv"] = hypervolume(F, reference) if reference is not None else float("nan")
        rows.append(row)
    sink = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(sink, fieldnames=["file", "gd", "hv", "n_nd"])
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if out:
            sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moma", description="Multi-objective memetic optimization runs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one algorithm for --reps seeds"),
                           ("compare", "run several algorithms on shared seeds")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--algorithm", choices=ALGORITHMS)
        p.add_argument("--seed", type=int, help="master seed; run i uses seed + i")
        p.add_argument("--reps", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.add_argument("--dry-run", action="store_true", help="print the resolved configuration only")
    p = sub.add_parser("metrics", help="GD / HV / N_nd of front CSV files")
    p.add_argument("fronts", nargs="+")
    p.add_argument("--oracle", help="true-front CSV for GD")
    p.add_argument("--ref", help="comma-separated reference point for HV")
    p.add_argument("--out", help="write the table here instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "metrics":
            ref = np.array([float(x) for x in args.ref.split(",")]) if args.ref else None
            return cmd_metrics(args.fronts, args.oracle, ref, args.out)
        spec = _load_spec(args)
        if args.dry_run:
            print(echo_config(spec), end="")
            return 0
        return cmd_run(spec) if args.command == "run" else cmd_compare(spec)
    except (MomaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
