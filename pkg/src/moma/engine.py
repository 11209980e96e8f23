"""Top-level optimizers and the batch protocol.

``run_moma_aw``, ``run_nsga2`` and the per-weight inner loop of
``run_soga_fw`` share one generational loop (:func:`_evolve`); NSGA-II is
that loop with the weight machinery and local descent switched off, so
for the same seed it consumes the random stream identically.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .genome import Genome
from .localsearch import CompositeObjective, EpsSchedule, LocalSearchBudget, local_descent
from .metrics import FrontArchive, generational_distance, hypervolume, write_front_csv
from .moea import Population, crossover, environmental_selection, mutate
from .problems import Problem, instance_from_descriptor
from .weights import assign_weights_to_solutions, simplex_lattice, update_weights

log = logging.getLogger(__name__)

ALGORITHMS = ("MOMA-AW", "SOGA-FW", "NSGA-II")


@dataclass
class RunConfig:
    algorithm: str = "MOMA-AW"
    N_A: int = 64
    N_I: int = 40
    p_M: float = 1.0
    p_C: float = 0.9
    N_CP: int = 1
    delta_r: float = 0.5
    delta_c: float = 0.1
    eps_kind: str = "taper"
    eps_hi: float = 1e-3
    eps_lo: float = 1e-6
    eps_t_start: int = 10
    eps_t_end: int = 30
    max_flips: int = 10_000
    counter_mode: str = "accepted"
    problem: dict = field(default_factory=lambda: {"name": "lotz", "seed": 0, "n": 16})
    seed: int = 0
    threads: int = 1
    soga_k: int = 8
    soga_budget: str = "full"
    # stop at the first generation barrier past these totals (None: unlimited)
    max_evaluations: int | None = None
    max_perturbations: int | None = None
    # "optima": archive every locally optimized offspring; "trajectory": also every descent step
    archive: str = "trajectory"
    memoize: bool = False
    negate_assignment: bool = False
    # switches used by the algorithm presets; MOMA-AW has both on
    local_search: bool = True
    adapt_weights: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm: expected one of {ALGORITHMS}, got {self.algorithm!r}")
        for key in ("N_A", "N_CP", "max_flips", "threads", "soga_k", "eps_t_start", "eps_t_end"):
            if int(getattr(self, key)) < 1:
                raise ConfigurationError(f"{key}: must be a positive integer")
        if self.N_A < 2:
            raise ConfigurationError("N_A: must be >= 2")
        if self.N_I < 0:
            raise ConfigurationError("N_I: must be >= 0")
        for key in ("p_M", "p_C", "delta_r", "delta_c"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{key}: must lie in [0, 1], got {v}")
        if not self.eps_hi >= self.eps_lo >= 0:
            raise ConfigurationError("eps_hi, eps_lo: need eps_hi >= eps_lo >= 0")
        if self.eps_t_end <= self.eps_t_start:
            raise ConfigurationError("eps_t_end: must exceed eps_t_start")
        choices = {"eps_kind": ("taper", "constant"), "counter_mode": ("accepted", "evaluations"),
                   "soga_budget": ("full", "shared"), "archive": ("optima", "trajectory")}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigurationError(f"{key}: expected one of {allowed}, got {getattr(self, key)!r}")
        if self.algorithm == "SOGA-FW" and self.soga_k < 2:
            raise ConfigurationError("soga_k: need at least 2 sweep weights")
        if not isinstance(self.problem, dict) or "name" not in self.problem:
            raise ConfigurationError("problem: descriptor needs a 'name'")

    @property
    def eps_schedule(self) -> EpsSchedule:
        return EpsSchedule(self.eps_kind, self.eps_hi, self.eps_lo, self.eps_t_start, self.eps_t_end)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunResult:
    archive: FrontArchive
    trace: list[dict]
    wall_time: float
    seed: int
    config: RunConfig
    population: Population | None = None
    evaluations: int = 0
    perturbations: int = 0
    iterations: int = 0


@dataclass
class _Counters:
    evaluations: int = 0
    n_add: int = 0
    n_rem: int = 0

    @property
    def perturbations(self):
        return self.n_add + self.n_rem


def _budget_left(cfg: RunConfig, c: _Counters) -> bool:
    if cfg.max_evaluations is not None and c.evaluations >= cfg.max_evaluations:
        return False
    if cfg.max_perturbations is not None and c.perturbations >= cfg.max_perturbations:
        return False
    return True


def _evaluate(problem: Problem, genomes, c: _Counters) -> np.ndarray:
    c.evaluations += len(genomes)
    return problem.evaluate_batch(np.array([g.bits for g in genomes]))


def _make_offspring(P: Population, cfg: RunConfig, rng: np.random.Generator) -> list[Genome]:
    out: list[Genome] = []
    n = len(P)
    while len(out) < cfg.N_A:
        a, b = rng.integers(n, size=2)
        ga, gb = P.genomes[a], P.genomes[b]
        if rng.random() < cfg.p_C:
            ga, gb = crossover(ga, gb, cfg.N_CP, rng)
        out.append(mutate(ga, cfg.p_M, rng))
        if len(out) < cfg.N_A:
            out.append(mutate(gb, cfg.p_M, rng))
    return out


class _Descender:
    """Runs the local step over a batch of agents, in parallel, merged in agent order."""

    def __init__(self, problem: Problem, cfg: RunConfig, counters: _Counters, archive: FrontArchive):
        self.problem = problem
        self.cfg = cfg
        self.c = counters
        self.archive = archive
        self.memo: dict = {}
        self.pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _one(self, args):
        g, f, w, scale, eps = args
        budget = LocalSearchBudget(eps=eps, max_flips=self.cfg.max_flips,
                                   counter_mode=self.cfg.counter_mode)
        obj = CompositeObjective(w, self.problem, scale)
        res = local_descent(g, obj, budget, objectives=f,
                            keep_trajectory=self.cfg.archive == "trajectory")
        return res, budget

    def run(self, genomes, F, W, scale, eps):
        jobs, keys, results = [], [], [None] * len(genomes)
        for i, (g, f, w) in enumerate(zip(genomes, F, W)):
            key = (g.bits.tobytes(), np.asarray(w).tobytes(), scale.tobytes(), eps)
            if self.cfg.memoize and key in self.memo:
                results[i] = self.memo[key]
                continue
            jobs.append((i, (g, f, w, scale, eps)))
            keys.append(key)
        args = [a for _, a in jobs]
        outs = list(self.pool.map(self._one, args)) if self.pool else [self._one(a) for a in args]
        for (i, _), key, (res, budget) in zip(jobs, keys, outs):
            self.c.evaluations += budget.evaluations
            self.c.n_add += budget.n_add
            self.c.n_rem += budget.n_rem
            if self.cfg.archive == "trajectory":
                for bits, f in res.trajectory:
                    self.archive.add(f, Genome._trusted(bits, res.genome.fixed_mask, res.genome.free))
            results[i] = res
            if self.cfg.memoize:
                self.memo[key] = res
        new_g = [r.genome for r in results]
        new_F = np.array([r.objectives for r in results])
        return new_g, new_F


def _scale(F) -> np.ndarray:
    F = np.asarray(F, float)
    return F.max(axis=0) - F.min(axis=0) + 1.0


def _trace_row(t, archive, ref, c: _Counters) -> dict:
    hv = hypervolume(archive.objectives, ref, nondominated=True) if len(archive) else 0.0
    return {"t": t, "hv": hv,
            "n_nd": len(archive), "perturbations": c.perturbations,
            "n_add": c.n_add, "n_rem": c.n_rem, "evaluations": c.evaluations}


def _evolve(problem: Problem, cfg: RunConfig, rng: np.random.Generator,
            fixed_weight=None) -> tuple[FrontArchive, list[dict], Population, _Counters, int]:
    """Shared generational loop.

    With ``fixed_weight`` the loop is a single-objective memetic search:
    every agent descends on that weight and survivors are the best
    composite values.  Otherwise survivors come from rank/crowding
    selection, and the local step (when enabled) uses adaptive weights.
    """
    M = problem.n_objectives
    c = _Counters()
    archive = FrontArchive(M)
    ref = problem.reference_point()
    eps_of = cfg.eps_schedule
    local = cfg.local_search
    desc = _Descender(problem, cfg, c, archive)
    try:
        genomes = [problem.random_genome(rng) for _ in range(cfg.N_A)]
        F = _evaluate(problem, genomes, c)
        W = None
        scale = None
        if fixed_weight is not None:
            scale = _scale(F)
            Wrows = np.repeat(np.asarray(fixed_weight, float)[None], cfg.N_A, axis=0)
        elif local:
            W = simplex_lattice(M, cfg.N_A)
            perm = assign_weights_to_solutions(F, W, negate=cfg.negate_assignment)
            Wrows = W.vectors[perm]
            scale = _scale(F)
        if local:
            genomes, F = desc.run(genomes, F, Wrows, scale, eps_of(1))
        archive.extend(F, genomes)
        P = Population(genomes, F)
        trace = [_trace_row(0, archive, ref, c)]
        t_done = 0
        for t in range(1, cfg.N_I + 1):
            if not _budget_left(cfg, c):
                break
            if local and fixed_weight is None and cfg.adapt_weights:
                W = update_weights(W, P.objectives, rng, delta_r=cfg.delta_r, delta_c=cfg.delta_c)
            kids = _make_offspring(P, cfg, rng)
            Fk = _evaluate(problem, kids, c)
            if local:
                if fixed_weight is None:
                    both = np.concatenate([P.objectives, Fk])
                    zl, zu = both.min(axis=0), both.max(axis=0)
                    perm = assign_weights_to_solutions(Fk, W, zl, zu, negate=cfg.negate_assignment)
                    Wrows = W.vectors[perm]
                    scale = zu - zl + 1.0
                kids, Fk = desc.run(kids, Fk, Wrows, scale, eps_of(t))
            archive.extend(Fk, kids)
            O = Population(kids, Fk)
            if fixed_weight is None:
                P = environmental_selection(P, O, cfg.N_A)
            else:
                pool = Population.concat(P, O)
                composite = (pool.objectives / scale) @ fixed_weight
                keep = np.argsort(composite, kind="stable")[: cfg.N_A]
                P = pool.take(keep)
            trace.append(_trace_row(t, archive, ref, c))
            t_done = t
    finally:
        desc.close()
    return archive, trace, P, c, t_done


def _problem_for(cfg: RunConfig) -> Problem:
    return instance_from_descriptor(cfg.problem)


def run_moma_aw(cfg: RunConfig, problem: Problem | None = None) -> RunResult:
    if cfg.algorithm != "MOMA-AW":
        cfg = cfg.replace(algorithm="MOMA-AW")
    return _run_single(cfg, problem)


def run_nsga2(cfg: RunConfig, problem: Problem | None = None) -> RunResult:
    cfg = cfg.replace(algorithm="NSGA-II", local_search=False, adapt_weights=False)
    return _run_single(cfg, problem)


def _run_single(cfg: RunConfig, problem: Problem | None) -> RunResult:
    problem = problem or _problem_for(cfg)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    archive, trace, P, c, t_done = _evolve(problem, cfg, rng)
    return RunResult(archive, trace, time.perf_counter() - t0, cfg.seed, cfg, P,
                     c.evaluations, c.perturbations, t_done)


def soga_weights(M: int, K: int) -> np.ndarray:
    """Uniform simplex sweep of ``K`` fixed weights (for M=2: (0,1) ... (1,0))."""
    return simplex_lattice(M, K).vectors


def run_soga_fw(cfg: RunConfig, problem: Problem | None = None) -> RunResult:
    """K independent single-weight memetic runs merged through one archive.

    ``soga_budget="full"`` gives every sweep weight the whole iteration and
    evaluation budget; ``"shared"`` splits both evenly across the sweep.
    """
    cfg = cfg.replace(algorithm="SOGA-FW", local_search=True)
    problem = problem or _problem_for(cfg)
    Ws = soga_weights(problem.n_objectives, cfg.soga_k)
    K = len(Ws)
    sub = cfg
    if cfg.soga_budget == "shared":
        sub = cfg.replace(
            N_I=max(1, cfg.N_I // K),
            max_evaluations=None if cfg.max_evaluations is None else cfg.max_evaluations // K,
            max_perturbations=None if cfg.max_perturbations is None else cfg.max_perturbations // K)
    seeds = np.random.SeedSequence(cfg.seed).spawn(K)
    t0 = time.perf_counter()
    archive = FrontArchive(problem.n_objectives)
    ref = problem.reference_point()
    total = _Counters()
    trace: list[dict] = []
    iters = 0
    for k, (w, ss) in enumerate(zip(Ws, seeds)):
        arch_k, trace_k, _, c, t_done = _evolve(problem, sub, np.random.default_rng(ss), fixed_weight=w)
        archive.extend(arch_k.objectives, arch_k.genomes)
        total.evaluations += c.evaluations
        total.n_add += c.n_add
        total.n_rem += c.n_rem
        iters += t_done
        row = _trace_row(k + 1, archive, ref, total)
        row["t"] = iters
        row["sweep"] = k
        trace.append(row)
    return RunResult(archive, trace, time.perf_counter() - t0, cfg.seed, cfg, None,
                     total.evaluations, total.perturbations, iters)


RUNNERS = {"MOMA-AW": run_moma_aw, "SOGA-FW": run_soga_fw, "NSGA-II": run_nsga2}


def run(cfg: RunConfig, problem: Problem | None = None) -> RunResult:
    return RUNNERS[cfg.algorithm](cfg, problem)


# ---------------------------------------------------------------- outputs

TRACE_FIELDS = ["t", "hv", "n_nd", "perturbations", "n_add", "n_rem", "evaluations"]


def write_trace_csv(trace: list[dict], path: str | Path):
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, extrasaction="ignore")
        w.writeheader()
        for row in trace:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_run_outputs(result: RunResult, outdir: str | Path, stem: str = "run") -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"front": outdir / f"{stem}_front.csv", "trace": outdir / f"{stem}_trace.csv",
             "config": outdir / f"{stem}_config.json"}
    write_front_csv(result.archive, paths["front"])
    write_trace_csv(result.trace, paths["trace"])
    paths["config"].write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True))
    return paths


# ---------------------------------------------------------------- batches

# direction of "best" per metric
METRIC_SENSE = {"hv": max, "gd": min, "n_nd": max, "perturbations": min,
                "evaluations": min, "wall_time": min}


def run_metrics(result: RunResult, problem: Problem) -> dict:
    row = {"hv": hypervolume(result.archive.objectives, problem.reference_point()),
           "n_nd": len(result.archive), "perturbations": result.perturbations,
           "evaluations": result.evaluations, "wall_time": result.wall_time}
    front = problem.true_front()
    row["gd"] = (generational_distance(result.archive.objectives, front)
                 if front is not None else float("nan"))
    return row


def summarize(rows: list[dict]) -> list[dict]:
    """Mean/best/worst and five-number summary per metric over successful runs."""
    ok = [r for r in rows if r.get("status", "ok") == "ok"]
    out = []
    for metric, sense in METRIC_SENSE.items():
        vals = np.array([r[metric] for r in ok if metric in r], float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            continue
        q = np.percentile(vals, [0, 25, 50, 75, 100])
        best = sense(vals)
        worst = min(vals) if sense is max else max(vals)
        out.append({"metric": metric, "runs": int(vals.size), "mean": float(vals.mean()),
                    "best": float(best), "worst": float(worst), "min": q[0], "q1": q[1],
                    "median": q[2], "q3": q[3], "max": q[4]})
    return out


def run_batch(cfg: RunConfig, repetitions: int, outdir: str | Path | None = None,
              problem: Problem | None = None) -> dict:
    """Seeded repetitions ``cfg.seed + i``; a failing run is recorded and skipped."""
    if repetitions < 1:
        raise ConfigurationError("repetitions: must be >= 1")
    problem = problem or _problem_for(cfg)
    rows, results = [], []
    for i in range(repetitions):
        seed = cfg.seed + i
        row = {"algorithm": cfg.algorithm, "run": i, "seed": seed, "status": "ok"}
        try:
            res = run(cfg.replace(seed=seed), problem)
        except Exception as exc:  # noqa: BLE001 - batch must survive single failures
            log.exception("run %d (seed %d) failed", i, seed)
            row["status"] = f"failed: {exc}"
            rows.append(row)
            results.append(None)
            continue
        row.update(run_metrics(res, problem))
        rows.append(row)
        results.append(res)
        if outdir is not None:
            write_run_outputs(res, outdir, f"{cfg.algorithm}_seed{seed}")
    summary = summarize(rows)
    if outdir is not None:
        write_rows_csv(rows, Path(outdir) / f"{cfg.algorithm}_runs.csv")
        write_rows_csv(summary, Path(outdir) / f"{cfg.algorithm}_summary.csv")
    return {"runs": rows, "summary": summary, "results": results}


RUN_FIELDS = ["algorithm", "run", "seed", "status", "hv", "gd", "n_nd", "perturbations",
              "evaluations", "wall_time"]
SUMMARY_FIELDS = ["metric", "runs", "mean", "best", "worst", "min", "q1", "median", "q3", "max"]


def write_rows_csv(rows: list[dict], path: str | Path, fields=None):
    if fields is None:
        fields = SUMMARY_FIELDS if rows and "metric" in rows[0] else RUN_FIELDS
        if rows and "metric" in rows[0] and "algorithm" in rows[0]:
            fields = ["algorithm"] + SUMMARY_FIELDS
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
