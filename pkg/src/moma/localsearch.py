"""Weighted-sum steepest descent over single-element flips.

Every step scores all additions and removals of free elements and takes the
one with the largest drop of the composite value.  Problems backed by a
linear system score the flips through bordered-inverse updates instead of
fresh solves (see :class:`InverseState`).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, MomaError
from .genome import Genome

log = logging.getLogger(__name__)

REFACTOR_EVERY = 64
SINGULAR_TOL = 1e-12


class SingularUpdate(MomaError):
    """A rank-1 update would make the reduced system singular."""


def composite_value(f, w) -> float:
    f = np.asarray(f, float)
    w = np.asarray(w, float)
    if f.shape != w.shape:
        raise ContractError("objective and weight vectors differ in length")
    return float(w @ f)


@dataclass
class CompositeObjective:
    """Weighted sum of scaled objectives of one problem.

    ``scale`` divides each objective before weighting so that objectives of
    different magnitude are comparable.
    """

    weight: np.ndarray
    problem: object
    scale: np.ndarray | None = None

    def __post_init__(self):
        self.weight = np.asarray(self.weight, float)
        M = self.problem.n_objectives
        if self.weight.shape != (M,):
            raise ContractError(f"weight has {self.weight.size} entries, problem has {M} objectives")
        self.scale = np.ones(M) if self.scale is None else np.asarray(self.scale, float)

    def values(self, F) -> np.ndarray:
        return (np.atleast_2d(F) / self.scale) @ self.weight

    def __call__(self, f) -> float:
        return float(self.values(f)[0])


@dataclass
class LocalSearchBudget:
    eps: float = 1e-3
    max_flips: int = 10_000
    # "accepted" counts applied flips, "evaluations" counts every scored candidate
    counter_mode: str = "accepted"
    n_add: int = 0
    n_rem: int = 0
    evaluations: int = 0

    def __post_init__(self):
        if self.eps < 0:
            raise ContractError("eps must be nonnegative")
        if self.max_flips < 0:
            raise ContractError("max_flips must be nonnegative")
        if self.counter_mode not in ("accepted", "evaluations"):
            raise ContractError(f"unknown counter mode {self.counter_mode!r}")

    @property
    def perturbations(self) -> int:
        return self.n_add + self.n_rem


@dataclass
class DescentResult:
    genome: Genome
    objectives: np.ndarray
    value: float
    flips: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    trajectory: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    evaluations: int = 0
    stop_reason: str = ""


def local_descent(g: Genome, obj: CompositeObjective, budget: LocalSearchBudget,
                  objectives=None, keep_trajectory: bool = False) -> DescentResult:
    """Steepest descent until the relative gain drops below ``budget.eps``.

    Only strictly improving flips are taken; ties go to the lowest element
    index.  ``objectives`` may carry the already known objectives of ``g``.
    """
    problem = obj.problem
    session = problem.open_session(g.bits, objectives)
    free = g.free
    current = float(obj.values(session.objectives)[0])
    res = DescentResult(g, session.objectives.copy(), current, values=[current])
    if keep_trajectory:
        res.trajectory.append((session.bits.copy(), session.objectives.copy()))
    while True:
        if len(res.flips) >= budget.max_flips:
            res.stop_reason = "max_flips"
            break
        cand = session.candidate_objectives(free)
        res.evaluations += len(free)
        if budget.counter_mode == "evaluations":
            adds = int((~session.bits[free]).sum())
            budget.n_add += adds
            budget.n_rem += len(free) - adds
        vals = obj.values(cand) if len(free) else np.empty(0)
        bad = ~np.isfinite(vals)
        if bad.any():
            log.debug("skipping %d flips with failed evaluation", int(bad.sum()))
            vals = np.where(bad, np.inf, vals)
        if vals.size == 0 or vals.min() >= current:
            res.stop_reason = "local_minimum"
            break
        j = int(np.argmin(vals))
        gain = (current - vals[j]) / max(abs(current), 1e-30)
        if gain < budget.eps:
            res.stop_reason = "eps"
            break
        k = int(free[j])
        adding = not session.bits[k]
        session.apply(k, cand[j])
        if adding:
            budget.n_add += 1
        else:
            budget.n_rem += 1
        current = float(vals[j])
        res.flips.append(k)
        res.values.append(current)
        if keep_trajectory:
            res.trajectory.append((session.bits.copy(), session.objectives.copy()))
    budget.evaluations += res.evaluations
    res.genome = Genome._trusted(session.bits.copy(), g.fixed_mask, g.free)
    res.objectives = session.objectives.copy()
    res.value = current
    return res


def taper_schedule(t: int, t_start: int = 10, t_end: int = 30,
                   eps_hi: float = 1e-3, eps_lo: float = 1e-6) -> float:
    """Termination threshold for iteration ``t``: loose early, geometric decay, tight late."""
    if t < 1:
        raise ContractError("iteration index starts at 1")
    if not eps_hi >= eps_lo > 0:
        raise ContractError("need eps_hi >= eps_lo > 0")
    if t < t_start:
        return eps_hi
    if t >= t_end:
        return eps_lo
    frac = (t - t_start) / (t_end - t_start)
    return float(eps_hi * (eps_lo / eps_hi) ** frac)


@dataclass
class EpsSchedule:
    """``kind`` is ``"taper"`` or ``"constant"`` (which uses ``eps_hi``)."""

    kind: str = "taper"
    eps_hi: float = 1e-3
    eps_lo: float = 1e-6
    t_start: int = 10
    t_end: int = 30

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.eps_hi
        if self.kind == "taper":
            return taper_schedule(max(t, 1), self.t_start, self.t_end, self.eps_hi, self.eps_lo)
        raise ContractError(f"unknown eps schedule {self.kind!r}")


def sherman_morrison(A_inv: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse of ``A + u v^T`` from the inverse of ``A``."""
    Au = A_inv @ u
    vA = v @ A_inv
    denom = 1.0 + v @ Au
    if abs(denom) < SINGULAR_TOL:
        raise SingularUpdate("Sherman-Morrison denominator vanishes")
    return A_inv - np.outer(Au, vA) / denom


class InverseState:
    """Inverse of the principal submatrix of ``Z`` over an active index set.

    Adding an index borders the submatrix by one row and column; removing one
    deletes them.  Both are rank-1 corrections of the stored inverse and cost
    O(n^2).  Row ``i`` of ``inv`` belongs to ``active[i]``.
    """

    def __init__(self, Z: np.ndarray, active, inv: np.ndarray | None = None):
        self.Z = Z
        self.active = [int(a) for a in active]
        if inv is None:
            inv = np.linalg.inv(Z[np.ix_(self.active, self.active)])
        self.inv = inv
        self.updates = 0

    def copy(self) -> "InverseState":
        st = InverseState(self.Z, self.active, self.inv.copy())
        st.updates = self.updates
        return st

    def reduced(self) -> np.ndarray:
        return self.Z[np.ix_(self.active, self.active)]

    def refactorize(self):
        self.inv = np.linalg.inv(self.reduced())
        self.updates = 0

    def _bump(self):
        self.updates += 1
        if self.updates >= REFACTOR_EVERY:
            self.refactorize()

    def add(self, k: int) -> "InverseState":
        st = self.copy()
        st.add_inplace(k)
        return st

    def remove(self, k: int) -> "InverseState":
        st = self.copy()
        st.remove_inplace(k)
        return st

    def add_inplace(self, k: int):
        if k in self.active:
            raise ContractError(f"index {k} already active")
        b = self.Z[self.active, k]
        c = self.Z[k, self.active]
        Bb = self.inv @ b
        cB = c @ self.inv
        s = self.Z[k, k] - c @ Bb
        if abs(s) < SINGULAR_TOL:
            raise SingularUpdate(f"adding {k} makes the system singular")
        n = len(self.active)
        new = np.empty((n + 1, n + 1), dtype=np.result_type(self.inv, self.Z))
        new[:n, :n] = self.inv + np.outer(Bb, cB) / s
        new[:n, n] = -Bb / s
        new[n, :n] = -cB / s
        new[n, n] = 1.0 / s
        self.inv = new
        self.active.append(int(k))
        self._bump()

    def remove_inplace(self, k: int):
        try:
            pos = self.active.index(int(k))
        except ValueError:
            raise ContractError(f"index {k} is not active") from None
        if len(self.active) == 1:
            raise SingularUpdate("cannot remove the last active index")
        d = self.inv[pos, pos]
        if abs(d) < SINGULAR_TOL:
            raise SingularUpdate(f"removing {k} makes the system singular")
        keep = np.r_[0:pos, pos + 1 : len(self.active)]
        col = self.inv[keep, pos]
        row = self.inv[pos, keep]
        self.inv = self.inv[np.ix_(keep, keep)] - np.outer(col, row) / d
        del self.active[pos]
        self._bump()


def write_trace(res: DescentResult, eps: float, path: str | Path):
    """CSV of one descent: step, flipped element, composite value; last row marks the stop."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "flip", "value", "eps"])
        w.writerow([0, "", repr(res.values[0]), ""])
        for i, (k, v) in enumerate(zip(res.flips, res.values[1:]), start=1):
            w.writerow([i, k, repr(v), ""])
        w.writerow([len(res.flips), "stop:" + res.stop_reason, repr(res.value), repr(eps)])
