"""Binary shape representation and geometric size measures.

A shape is a fixed-length 0/1 vector over discrete elements (pixels,
triangles, basis-function supports).  Elements flagged in the fixed mask are
locked active, e.g. the element carrying the feed.

Geometric size uses a precomputed max-distance matrix: ``D[p, q]`` is the
largest distance between any vertex of element ``p`` and any vertex of
element ``q``.  Half the largest entry over active pairs is the radius of
the smallest sphere centred between the two farthest points, and the same
machinery fed with single coordinates gives widths and heights.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError, EmptyShapeError, GeometryError

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True, eq=False)
class Genome:
    bits: np.ndarray
    fixed_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool).copy()
        if self.fixed_mask is None:
            mask = np.zeros_like(bits)
        else:
            mask = np.asarray(self.fixed_mask).astype(bool).copy()
        if bits.ndim != 1 or mask.shape != bits.shape:
            raise ContractError("bits and fixed_mask must be 1-D of equal length")
        if np.any(mask & ~bits):
            raise ContractError("every fixed element must be active")
        bits.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "fixed_mask", mask)

    @classmethod
    def _trusted(cls, bits: np.ndarray, mask: np.ndarray, free=None) -> "Genome":
        """Skip validation for bits the caller built from valid genomes (owns ``bits``)."""
        g = object.__new__(cls)
        bits.flags.writeable = False
        object.__setattr__(g, "bits", bits)
        object.__setattr__(g, "fixed_mask", mask)
        if free is not None:
            g.__dict__["free"] = free
        return g

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Genome):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and np.array_equal(
            self.fixed_mask, other.fixed_mask
        )

    def __hash__(self) -> int:
        return hash((self.bits.tobytes(), self.fixed_mask.tobytes()))

    def __repr__(self) -> str:
        return f"Genome('{self.to_string()}')"

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @cached_property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed_mask)

    def n_active(self) -> int:
        return int(self.bits.sum())

    def flipped(self, k: int) -> "Genome":
        if self.fixed_mask[k]:
            raise ContractError(f"element {k} is fixed")
        bits = self.bits.copy()
        bits[k] = ~bits[k]
        return Genome._trusted(bits, self.fixed_mask, self.free)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_string(cls, text: str, fixed_mask=None) -> "Genome":
        text = text.strip()
        if set(text) - {"0", "1"}:
            raise ContractError(f"genome string may hold only 0/1, got {text!r}")
        return cls(np.array([c == "1" for c in text], dtype=bool), fixed_mask)


def random_genome(n: int, rng: np.random.Generator, fixed_mask=None, p: float = 0.5) -> Genome:
    mask = np.zeros(n, bool) if fixed_mask is None else np.asarray(fixed_mask, bool)
    bits = (rng.random(n) < p) | mask
    return Genome(bits, mask)


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Vertex sets of the discrete elements.

    ``vertices`` is an ``(n, V, 3)`` array; elements with fewer than ``V``
    vertices are padded by repeating one of their own vertices, which leaves
    every max-distance unchanged.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 3 or v.shape[0] == 0 or v.shape[1] == 0 or v.shape[2] != 3:
            raise GeometryError("vertices must have shape (n_elements, n_vertices, 3)")
        if not np.all(np.isfinite(v)):
            raise GeometryError("element coordinates must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    @property
    def n_elements(self) -> int:
        return self.vertices.shape[0]

    @classmethod
    def from_elements(cls, elements: Sequence[Sequence[Sequence[float]]]) -> "ElementGeometry":
        if len(elements) == 0:
            raise GeometryError("geometry needs at least one element")
        width = max(len(e) for e in elements)
        out = np.empty((len(elements), width, 3))
        for i, elem in enumerate(elements):
            if len(elem) == 0:
                raise GeometryError(f"element {i} has no vertices")
            pts = np.zeros((len(elem), 3))
            for j, p in enumerate(elem):
                p = list(p)
                if not 1 <= len(p) <= 3:
                    raise GeometryError(f"element {i}: vertex must have 1 to 3 coordinates")
                pts[j, : len(p)] = p
            out[i, : len(elem)] = pts
            out[i, len(elem):] = pts[0]
        return cls(out)


def pixel_grid_geometry(nx: int, ny: int, pitch: float = 1.0) -> ElementGeometry:
    """Square pixels of a ``nx`` by ``ny`` grid in the xy plane, row-major in x."""
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ix, iy = ix.ravel(), iy.ravel()
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    v = np.zeros((nx * ny, 4, 3))
    v[:, :, 0] = (ix[:, None] + corners[None, :, 0]) * pitch
    v[:, :, 1] = (iy[:, None] + corners[None, :, 1]) * pitch
    return ElementGeometry(v)


def build_distance_matrix(geom: ElementGeometry, axis: str | None = None) -> np.ndarray:
    """Max vertex-pair distance between every pair of elements.

    With ``axis`` set, only that coordinate enters the distance, which turns
    the circumscribing radius into half the extent along the axis.
    """
    v = geom.vertices
    if axis is not None:
        v = v[:, :, AXES[axis]][:, :, None]
    n = v.shape[0]
    D = np.empty((n, n))
    chunk = max(1, 2_000_000 // (n * v.shape[1] ** 2 * v.shape[2] + 1))
    for start in range(0, n, chunk):
        blk = v[start : start + chunk]
        diff = blk[:, None, :, None, :] - v[None, :, None, :, :]
        D[start : start + chunk] = np.sqrt((diff**2).sum(-1)).max(axis=(2, 3))
    return np.maximum(D, D.T)


def _active_bits(g) -> np.ndarray:
    bits = g.bits if isinstance(g, Genome) else np.asarray(g, bool)
    if not bits.any():
        raise EmptyShapeError("shape has no active element")
    return bits


def circumscribing_radius(g, D: np.ndarray) -> float:
    bits = _active_bits(g)
    idx = np.flatnonzero(bits)
    return 0.5 * float(D[np.ix_(idx, idx)].max())


def axis_extent(g, geom: ElementGeometry, axis: str) -> float:
    bits = _active_bits(g)
    coords = geom.vertices[bits][:, :, AXES[axis]]
    return float(coords.max() - coords.min())


class RadiusTracker:
    """Circumscribing radius kept current under single-element flips.

    Each row keeps its two largest entries over the active set, so the radius
    after removing any one element is available without a rescan.
    """

    def __init__(self, D: np.ndarray, bits):
        self.D = D
        self.bits = np.asarray(bits, bool).copy()
        self._rebuild()

    def _rebuild(self):
        idx = np.flatnonzero(self.bits)
        if idx.size == 0:
            raise EmptyShapeError("shape has no active element")
        sub = self.D[:, idx]
        if idx.size == 1:
            self.top1_idx = np.full(self.D.shape[0], idx[0])
            self.top1 = sub[:, 0].copy()
            self.top2 = np.full(self.D.shape[0], -np.inf)
        else:
            order = np.argsort(-sub, axis=1, kind="stable")[:, :2]
            rows = np.arange(sub.shape[0])
            self.top1_idx = idx[order[:, 0]]
            self.top1 = sub[rows, order[:, 0]]
            self.top2 = sub[rows, order[:, 1]]

    @property
    def radius(self) -> float:
        return 0.5 * float(self.top1[self.bits].max())

    def radius_after_add(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, int)
        cur = self.top1[self.bits].max()
        reach = np.maximum(self.D[ks][:, self.bits].max(axis=1), self.D[ks, ks])
        return 0.5 * np.maximum(cur, reach)

    def radius_after_remove(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, int)
        act = np.flatnonzero(self.bits)
        # row p's max once k is gone
        rowmax = np.where(self.top1_idx[act][None, :] == ks[:, None], self.top2[act][None, :],
                          self.top1[act][None, :])
        rowmax = np.where(act[None, :] == ks[:, None], -np.inf, rowmax)
        out = 0.5 * rowmax.max(axis=1)
        if np.any(~np.isfinite(out)):
            raise EmptyShapeError("removal would leave no active element")
        return out

    def flip(self, k: int):
        self.bits[k] = ~self.bits[k]
        self._rebuild()


def load_geometry(path: str | Path) -> ElementGeometry:
    """Read element vertices from JSON or CSV.

    JSON: ``{"elements": [[[x, y, z], ...], ...]}`` or a bare list of elements.
    CSV: header ``element,x,y,z``; one row per vertex, elements numbered from 0.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        elements = data["elements"] if isinstance(data, dict) else data
        return ElementGeometry.from_elements(elements)
    groups: dict[int, list[list[float]]] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                eid = int(row["element"])
                pt = [float(row.get(c) or 0.0) for c in ("x", "y", "z")]
            except (KeyError, ValueError) as exc:
                raise GeometryError(f"{path}: bad geometry row {row}") from exc
            groups.setdefault(eid, []).append(pt)
    if sorted(groups) != list(range(len(groups))):
        raise GeometryError(f"{path}: element ids must be 0..n-1")
    return ElementGeometry.from_elements([groups[i] for i in range(len(groups))])


def save_geometry(geom: ElementGeometry, path: str | Path):
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps({"elements": geom.vertices.tolist()}))
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "x", "y", "z"])
        for i, elem in enumerate(geom.vertices):
            for p in elem:
                w.writerow([i, *(repr(float(c)) for c in p)])
