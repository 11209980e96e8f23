"""NSGA-II building blocks: dominance, front sorting, crowding, variation, selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .genome import Genome


def dominates(a, b) -> bool:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape:
        raise ContractError(f"objective vectors differ in length: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def domination_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` dominates row ``j``."""
    F = np.asarray(F, float)
    n, M = F.shape
    le = np.ones((n, n), bool)
    lt = np.zeros((n, n), bool)
    for m in range(M):
        col = F[:, m]
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    return le & lt


def fast_nondominated_sort(F) -> list[np.ndarray]:
    """Index arrays of successive fronts, each sorted ascending."""
    F = np.asarray(F, float)
    if len(F) == 0:
        raise ContractError("cannot sort an empty population")
    dom = domination_matrix(F)
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current)
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def front_ranks(F) -> np.ndarray:
    rank = np.empty(len(F), int)
    for r, front in enumerate(fast_nondominated_sort(F), start=1):
        rank[front] = r
    return rank


def crowding_distance(front) -> np.ndarray:
    """Crowding distance of every member of one front.

    Exact duplicates share one slot: the first occurrence carries the value
    and the copies get 0, so clones never crowd out distinct points.  An
    objective with zero spread on the front contributes nothing.
    """
    F = np.asarray(front, float)
    n = len(F)
    if n <= 2:
        return np.full(n, np.inf)
    uniq, first = np.unique(F, axis=0, return_index=True)
    k = len(uniq)
    dist = np.zeros(k)
    if k <= 2:
        dist[:] = np.inf
    else:
        for m in range(F.shape[1]):
            order = np.argsort(uniq[:, m], kind="stable")
            vals = uniq[order, m]
            span = vals[-1] - vals[0]
            if span <= 0:
                continue
            dist[order[0]] = np.inf
            dist[order[-1]] = np.inf
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    out = np.zeros(n)
    out[first] = dist
    return out


def crossover(a: Genome, b: Genome, n_cp: int, rng: np.random.Generator,
              cuts=None) -> tuple[Genome, Genome]:
    """``n_cp``-point crossover; segments between cuts alternate parents.

    ``cuts`` (positions in 1..n-1) may be given to make the operation
    deterministic.
    """
    if len(a) != len(b):
        raise ContractError("parents differ in length")
    n = len(a)
    if cuts is None:
        k = min(n_cp, n - 1)
        if k == 1:
            cuts = [1 + int(rng.integers(n - 1))]
        else:
            cuts = np.sort(rng.choice(np.arange(1, n), size=k, replace=False)) if k > 0 else []
    swap = np.zeros(n, bool)
    for c in cuts:
        swap[c:] = ~swap[c:]
    if a.fixed_mask is b.fixed_mask:
        mask, free = a.fixed_mask, a.free
    else:
        mask, free = a.fixed_mask | b.fixed_mask, None
        mask.flags.writeable = False
    c1 = np.where(swap, b.bits, a.bits) | mask
    c2 = np.where(swap, a.bits, b.bits) | mask
    return Genome._trusted(c1, mask, free), Genome._trusted(c2, mask, free)


def mutate(g: Genome, p_m: float, rng: np.random.Generator) -> Genome:
    """With probability ``p_m`` flip exactly one uniformly chosen free bit."""
    if rng.random() >= p_m:
        return g
    free = g.free
    if free.size == 0:
        return g
    return g.flipped(int(free[rng.integers(free.size)]))


@dataclass
class Population:
    """Agents of one generation as parallel arrays."""

    genomes: list
    objectives: np.ndarray
    weights: np.ndarray | None = None
    rank: np.ndarray | None = None
    crowding: np.ndarray | None = None

    def __len__(self):
        return len(self.genomes)

    def take(self, idx) -> "Population":
        idx = np.asarray(idx, int)
        pick = lambda arr: None if arr is None else np.asarray(arr)[idx]  # noqa: E731
        return Population([self.genomes[i] for i in idx], self.objectives[idx],
                          pick(self.weights), pick(self.rank), pick(self.crowding))

    @staticmethod
    def concat(a: "Population", b: "Population") -> "Population":
        def cat(x, y):
            if x is None or y is None:
                return None
            return np.concatenate([x, y])
        return Population(list(a.genomes) + list(b.genomes),
                          np.concatenate([a.objectives, b.objectives]),
                          cat(a.weights, b.weights), None, None)


def select_indices(F: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-then-crowding truncation; returns chosen indices with their rank and crowding."""
    F = np.asarray(F, float)
    if N > len(F):
        raise ContractError(f"cannot select {N} from {len(F)} candidates")
    chosen, ranks, crowd = [], [], []
    for r, front in enumerate(fast_nondominated_sort(F), start=1):
        cd = crowding_distance(F[front])
        room = N - len(chosen)
        if room <= 0:
            break
        if len(front) > room:
            order = np.argsort(-cd, kind="stable")[:room]
            front, cd = front[order], cd[order]
        chosen.extend(front.tolist())
        ranks.extend([r] * len(front))
        crowd.extend(cd.tolist())
    return np.array(chosen, int), np.array(ranks, int), np.array(crowd, float)


def environmental_selection(parents: Population, offspring: Population, N: int) -> Population:
    pool = Population.concat(parents, offspring)
    idx, ranks, crowd = select_indices(pool.objectives, N)
    out = pool.take(idx)
    out.rank, out.crowding = ranks, crowd
    return out
