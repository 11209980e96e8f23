"""Front bookkeeping and quality indicators: nondominated filtering, GD, hypervolume."""

from __future__ import annotations

import csv
import logging
import warnings
from pathlib import Path

import numpy as np

from .errors import ContractError
from .genome import Genome

log = logging.getLogger(__name__)

MC_SAMPLES = 1_000_000
# objective ranges this far apart trigger normalization before GD
RANGE_RATIO_LIMIT = 1e3


def nondominated_mask(F) -> np.ndarray:
    """True for rows not dominated by any other row (duplicates are all kept)."""
    F = np.asarray(F, float)
    if F.ndim != 2 or len(F) == 0:
        raise ContractError("need a non-empty (n, M) array of objective vectors")
    keep = np.ones(len(F), bool)
    # a dominated point is dominated by some surviving point too, so skipping
    # already-removed rows is safe
    for i in np.lexsort(F.T[::-1]):
        if keep[i]:
            keep &= ~(np.all(F[i] <= F, axis=1) & np.any(F[i] < F, axis=1))
    return keep


def nondominated_points(F) -> np.ndarray:
    """Distinct nondominated objective vectors, sorted lexicographically."""
    F = np.asarray(F, float)
    return np.unique(F[nondominated_mask(F)], axis=0)


class FrontArchive:
    """Mutually nondominated objective vectors, each with a representative genome.

    Equal objective vectors collapse to one entry (the first genome seen), so
    ``len(archive)`` is the count of distinct nondominated points.
    """

    def __init__(self, M: int | None = None):
        self.M = M
        self._F = np.empty((0, M or 0))
        self._genomes: list = []

    def __len__(self):
        return len(self._genomes)

    @property
    def objectives(self) -> np.ndarray:
        return self._F.copy()

    @property
    def genomes(self) -> list:
        return list(self._genomes)

    @property
    def n_nd(self) -> int:
        return len(self)

    @property
    def z_L(self) -> np.ndarray:
        return self._F.min(axis=0)

    @property
    def z_U(self) -> np.ndarray:
        return self._F.max(axis=0)

    def add(self, f, genome=None) -> bool:
        """Insert one point; returns whether it entered the archive."""
        f = np.asarray(f, float)
        if self.M is None:
            self.M = f.size
            self._F = np.empty((0, self.M))
        if f.shape != (self.M,):
            raise ContractError(f"expected {self.M} objectives, got {f.shape}")
        if not np.all(np.isfinite(f)):
            return False
        if len(self._F):
            le = np.all(self._F <= f, axis=1)
            if le.any():  # an equal or dominating point is already there
                return False
            dominated = np.all(f <= self._F, axis=1)
            if dominated.any():
                keep = ~dominated
                self._F = self._F[keep]
                self._genomes = [g for g, k in zip(self._genomes, keep) if k]
        self._F = np.vstack([self._F, f])
        self._genomes.append(genome)
        return True

    def extend(self, F, genomes=None):
        F = np.atleast_2d(np.asarray(F, float))
        genomes = [None] * len(F) if genomes is None else list(genomes)
        if self.M is not None and len(self._F) and F.shape[1] == self.M:
            # cheap vectorized pre-pass: drop points already covered by the archive
            covered = np.all(self._F[None, :, :] <= F[:, None, :], axis=2).any(axis=1)
            idx = np.flatnonzero(~covered)
            F = F[idx]
            genomes = [genomes[i] for i in idx]
        for f, g in zip(F, genomes):
            self.add(f, g)

    def sorted(self) -> tuple[np.ndarray, list]:
        order = np.lexsort(self._F.T[::-1])
        return self._F[order], [self._genomes[i] for i in order]


def nondominated_filter(points, genomes=None) -> FrontArchive:
    F = np.atleast_2d(np.asarray(points, float))
    if F.size == 0:
        raise ContractError("nondominated_filter needs at least one point")
    arch = FrontArchive(F.shape[1])
    arch.extend(F, genomes)
    return arch


def utopian_nadir(points) -> tuple[np.ndarray, np.ndarray]:
    F = np.atleast_2d(np.asarray(points, float))
    if F.size == 0:
        raise ContractError("need at least one point")
    return F.min(axis=0), F.max(axis=0)


def _as_points(x) -> np.ndarray:
    if isinstance(x, FrontArchive):
        return x.objectives
    return np.atleast_2d(np.asarray(x, float))


def generational_distance(G, G_true, normalize: bool | None = None,
                          bounds=None, literal: bool = False) -> float:
    """Root of the summed squared nearest distances to ``G_true``, divided by |G|.

    ``normalize=None`` rescales both sets when objective ranges differ by more
    than ``RANGE_RATIO_LIMIT``; bounds default to those of ``G_true``.
    ``literal=True`` sums unsquared coordinate differences inside the
    distance (debug comparison only).
    """
    A = _as_points(G)
    B = _as_points(G_true)
    if A.size == 0 or B.size == 0:
        raise ContractError("both fronts must be non-empty")
    if A.shape[1] != B.shape[1]:
        raise ContractError("fronts have different objective counts")
    lo, hi = (B.min(axis=0), B.max(axis=0)) if bounds is None else map(np.asarray, bounds)
    if normalize is None:
        span = np.ptp(np.concatenate([A, B]), axis=0)
        pos = span[span > 0]
        normalize = bool(pos.size and pos.max() / pos.min() > RANGE_RATIO_LIMIT)
    if normalize:
        scale = np.where(hi > lo, hi - lo, 1.0)
        A = (A - lo) / scale
        B = (B - lo) / scale
    diff = A[:, None, :] - B[None, :, :]
    if literal:
        d = np.sqrt(np.abs(diff.sum(axis=2)))
    else:
        d = np.sqrt((diff ** 2).sum(axis=2))
    dmin = d.min(axis=1)
    return float(np.sqrt((dmin ** 2).sum()) / len(A))


def _clip_to_reference(F, ref) -> np.ndarray:
    F = _as_points(F)
    ref = np.asarray(ref, float)
    if F.shape[1] != ref.size:
        raise ContractError("reference point dimension mismatch")
    inside = np.all(F < ref, axis=1)
    beyond = np.any(F > ref, axis=1)
    if beyond.any():
        warnings.warn(f"{int(beyond.sum())} points beyond the reference excluded", RuntimeWarning,
                      stacklevel=3)
    return F[inside]


def _hv2d(F, ref) -> float:
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    area = 0.0
    best_y = ref[1]
    for x, y in F:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(area)


def _hv3d(F, ref) -> float:
    """Slice along the third objective; each slab's area is a 2-D sweep."""
    F = F[np.argsort(F[:, 2], kind="stable")]
    zs = np.append(F[:, 2], ref[2])
    vol = 0.0
    for i in range(len(F)):
        h = zs[i + 1] - zs[i]
        if h > 0:
            vol += h * _hv2d(F[: i + 1, :2], ref[:2])
    return float(vol)


def hypervolume_mc(F, ref, n_samples: int = MC_SAMPLES, rng=None,
                   chunk: int = 100_000) -> tuple[float, float]:
    """Monte-Carlo estimate of the dominated volume and its standard error."""
    F = _clip_to_reference(F, ref)
    ref = np.asarray(ref, float)
    if len(F) == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(0) if rng is None else rng
    lo = F.min(axis=0)
    box = float(np.prod(ref - lo))
    hits = 0
    for start in range(0, n_samples, chunk):
        m = min(chunk, n_samples - start)
        S = lo + rng.random((m, ref.size)) * (ref - lo)
        dom = np.zeros(m, bool)
        for f in F:
            dom |= np.all(S >= f, axis=1)
        hits += int(dom.sum())
    p = hits / n_samples
    return box * p, box * np.sqrt(p * (1 - p) / n_samples)


def hypervolume(F, ref, n_samples: int = MC_SAMPLES, rng=None, return_error: bool = False,
                nondominated: bool = False):
    """Volume dominated by ``F`` and bounded by ``ref``.

    Exact for two and three objectives; Monte-Carlo above (error reported
    when ``return_error``).  Points beyond ``ref`` are dropped with a warning.
    ``nondominated=True`` skips the filtering pass for inputs known to be a front.
    """
    ref = np.asarray(ref, float)
    P = _clip_to_reference(F, ref)
    if len(P) == 0:
        return (0.0, 0.0) if return_error else 0.0
    if not nondominated:
        P = nondominated_points(P)
    M = ref.size
    if M == 1:
        val, err = float(ref[0] - P[:, 0].min()), 0.0
    elif M == 2:
        val, err = _hv2d(P, ref), 0.0
    elif M == 3:
        val, err = _hv3d(P, ref), 0.0
    else:
        val, err = hypervolume_mc(P, ref, n_samples, rng)
    return (val, err) if return_error else val


def write_front_csv(archive: FrontArchive, path: str | Path):
    F, genomes = archive.sorted()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{m + 1}" for m in range(F.shape[1])] + ["genome"])
        for f, g in zip(F, genomes):
            w.writerow([repr(float(x)) for x in f] + [g.to_string() if g is not None else ""])


def read_front_csv(path: str | Path) -> FrontArchive:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, rows = rows[0], rows[1:]
    M = sum(1 for h in header if h.startswith("f"))
    arch = FrontArchive(M)
    for r in rows:
        g = Genome.from_string(r[M]) if len(r) > M and r[M] else None
        arch.add(np.array(r[:M], float), g)
    return arch
