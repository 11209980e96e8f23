"""Adaptive objective weights.

Weights are convex M-vectors.  Each iteration, solutions of the previous
generation are grouped around their angularly closest weight; weights that
attract nobody are replaced by fresh vectors drawn in a narrow cone around
them, chosen to spread the set as widely as possible.  Offspring are then
matched to weights by a greedy smallest-angle-first pairing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

# capacity of a weight's neighborhood
N_L_MAX = 3
# new vectors proposed per vacated weight
N_W = 3


@dataclass
class WeightSet:
    """Columns of the weight matrix, stored row-wise as an ``(N, M)`` array."""

    vectors: np.ndarray
    neighborhood_size: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, float))
        if self.neighborhood_size is None:
            self.neighborhood_size = np.zeros(len(self.vectors), int)
        if self.vectors.size and (np.any(self.vectors < 0) or
                                  np.any(np.abs(self.vectors.sum(1) - 1) > 1e-12)):
            raise ConfigurationError("weight vectors must be nonnegative and sum to 1")

    def __len__(self):
        return len(self.vectors)

    def __getitem__(self, i):
        return self.vectors[i]


@dataclass
class Neighborhoods:
    members: list[list[int]]
    spill: list[int]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], int)


def _to_simplex(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    return v / v.sum(axis=-1, keepdims=True)


def lattice_points(M: int, H: int) -> np.ndarray:
    """All vectors with entries in {0, 1/H, ..., 1} summing to one.

    Ordered so that the first coordinate increases slowest.
    """
    pts = []
    for bars in combinations(range(H + M - 1), M - 1):
        edges = (-1,) + bars + (H + M - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(M)])
    pts = np.array(pts, float)[::-1] / H
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def simplex_lattice(M: int, N: int) -> WeightSet:
    if M < 2:
        raise ConfigurationError(f"need at least 2 objectives, got M={M}")
    if N < M:
        raise ConfigurationError(f"need N >= M weight vectors, got N={N}, M={M}")
    H = 1
    while comb(H + M - 1, M - 1) < N:
        H += 1
    pts = lattice_points(M, H)
    if len(pts) == N:
        return WeightSet(_to_simplex(pts))
    # greedy farthest-point subsampling, seeded with the unit vectors
    units = [int(np.flatnonzero(np.isclose(pts[:, m], 1.0))[0]) for m in range(M)]
    chosen = list(units)
    gap = np.min(angle_matrix(pts, pts[chosen]), axis=1)
    gap[chosen] = -np.inf
    while len(chosen) < N:
        j = int(np.argmax(gap))
        chosen.append(j)
        gap = np.minimum(gap, angle_matrix(pts, pts[j][None])[:, 0])
        gap[chosen] = -np.inf
    return WeightSet(_to_simplex(pts[sorted(chosen)]))


def normalize(F, z_L, z_U) -> np.ndarray:
    F = np.asarray(F, float)
    z_L = np.asarray(z_L, float)
    z_U = np.asarray(z_U, float)
    return (F - z_L) / (z_U - z_L + 1.0)


def angular_distance(f, w) -> float:
    return float(angle_matrix(np.atleast_2d(f), np.atleast_2d(w))[0, 0])


def angle_matrix(F: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Angles between every row of ``F`` and every row of ``W``.

    A zero row of ``F`` is at angle 0 to every weight.
    """
    F = np.asarray(F, float)
    W = np.asarray(W, float)
    nf = np.linalg.norm(F, axis=1)
    nw = np.linalg.norm(W, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (F @ W.T) / (nf[:, None] * nw[None, :])
    cos = np.where(nf[:, None] == 0, 1.0, cos)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def aperture_angle(M: int) -> float:
    return float(np.arccos(M ** -0.5) * (0.0353 * M - 0.0322))


def build_neighborhoods(W: WeightSet, F_hat: np.ndarray, n_l_max: int = N_L_MAX) -> Neighborhoods:
    if len(W) == 0:
        raise ConfigurationError("weight set is empty")
    A = angle_matrix(F_hat, W.vectors)
    members: list[list[int]] = [[] for _ in range(len(W))]
    spill: list[int] = []
    for i, row in enumerate(A):
        j = int(np.argmin(row))
        if len(members[j]) < n_l_max:
            members[j].append(i)
        else:
            spill.append(i)
    return Neighborhoods(members, spill)


def redistribute_spill(nb: Neighborhoods, delta_r: float, delta_c: float,
                       rng: np.random.Generator) -> Neighborhoods:
    """Empty the spill set into the neighborhoods.

    Spill members first revive empty neighborhoods while more than
    ``delta_c`` of them are empty; the rest go to a smallest non-empty
    neighborhood with probability ``delta_r``, otherwise to any non-empty one.
    """
    members = [list(m) for m in nb.members]
    spill = list(nb.spill)
    n = len(members)

    def empties():
        return [j for j in range(n) if not members[j]]

    empty = empties()
    while spill and len(empty) / n > delta_c:
        s = spill.pop(int(rng.integers(len(spill))))
        members[empty[int(rng.integers(len(empty)))]].append(s)
        empty = empties()
    for s in spill:
        sizes = np.array([len(m) for m in members])
        occupied = np.flatnonzero(sizes > 0)
        if rng.random() < delta_r:
            pool = occupied[sizes[occupied] == sizes[occupied].min()]
        else:
            pool = occupied
        members[int(pool[rng.integers(len(pool))])].append(s)
    return Neighborhoods(members, [])


def generate_wvg(w, n_w: int, xi: float, rng: np.random.Generator,
                 max_tries: int = 10_000) -> np.ndarray:
    """``n_w`` simplex vectors within angle ``xi`` of ``w``.

    Candidates are uniform simplex points pulled toward ``w`` by a factor
    tied to ``xi``; those outside the cone are rejected.  If the cone is so
    thin that rejection keeps failing, ``w`` itself is returned.
    """
    w = np.asarray(w, float)
    M = w.size
    rho = min(1.0, 4.0 * xi)
    out = []
    for _ in range(n_w):
        for _ in range(max_tries):
            c = _to_simplex((1.0 - rho) * w + rho * rng.dirichlet(np.ones(M)))
            if angular_distance(c, w) <= xi:
                break
        else:
            c = w.copy()
        out.append(c)
    return np.array(out)


def select_final_weights(W_new, W_t, N: int) -> WeightSet:
    new = [np.asarray(v, float) for v in np.asarray(W_new, float).reshape(-1, np.shape(W_t)[-1])]
    kept = [np.asarray(v, float) for v in np.asarray(W_t, float)]
    if len(kept) + len(new) < N:
        raise ConfigurationError(
            f"only {len(kept) + len(new)} candidate weights for {N} slots")
    while len(kept) < N:
        if kept:
            score = angle_matrix(np.array(new), np.array(kept)).sum(axis=1)
        else:
            score = np.zeros(len(new))
        j = int(np.argmax(score))
        kept.append(new.pop(j))
    return WeightSet(np.array(kept))


def update_weights(W: WeightSet, F: np.ndarray, rng: np.random.Generator, *,
                   delta_r: float = 0.5, delta_c: float = 0.1,
                   n_l_max: int = N_L_MAX, n_w: int = N_W) -> WeightSet:
    """One pass of the neighborhood-driven weight refresh for the current generation."""
    F = np.asarray(F, float)
    F_hat = normalize(F, F.min(axis=0), F.max(axis=0))
    nb = redistribute_spill(build_neighborhoods(W, F_hat, n_l_max), delta_r, delta_c, rng)
    sizes = nb.sizes
    vacant = np.flatnonzero(sizes == 0)
    if vacant.size == 0:
        return WeightSet(W.vectors.copy(), sizes)
    xi = aperture_angle(W.vectors.shape[1])
    W_new = np.concatenate([generate_wvg(W.vectors[j], n_w, xi, rng) for j in vacant])
    kept = W.vectors[sizes > 0]
    out = select_final_weights(W_new, kept, len(W))
    out.neighborhood_size = np.concatenate([sizes[sizes > 0], np.zeros(vacant.size, int)])
    return out


def assign_weights_to_solutions(F, W, z_L=None, z_U=None, negate: bool = False) -> np.ndarray:
    """Pair solutions with weights, smallest angle first.

    Returns ``perm`` with ``perm[i]`` the weight index given to solution ``i``.
    ``negate`` flips objective signs before normalizing.
    """
    F = np.asarray(F, float)
    Wv = W.vectors if isinstance(W, WeightSet) else np.asarray(W, float)
    if negate:
        F = -F
        z_L, z_U = (None, None) if z_L is None else (-np.asarray(z_U), -np.asarray(z_L))
    if z_L is None:
        z_L, z_U = F.min(axis=0), F.max(axis=0)
    A = angle_matrix(normalize(F, z_L, z_U), Wv)
    n = min(A.shape)
    perm = np.full(A.shape[0], -1, int)
    for _ in range(n):
        i, j = np.unravel_index(int(np.argmin(A)), A.shape)
        perm[i] = j
        A[i, :] = np.inf
        A[:, j] = np.inf
    return perm


def save_weights_csv(W: WeightSet, path: str | Path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"w{m + 1}" for m in range(W.vectors.shape[1])])
        for v in W.vectors:
            w.writerow([repr(float(x)) for x in v])


def load_weights_csv(path: str | Path) -> WeightSet:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return WeightSet(np.array(rows, float))
