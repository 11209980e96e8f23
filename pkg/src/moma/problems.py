"""Binary multi-objective test problems.

* ``lotz`` - leading-ones / trailing-zeros; the Pareto front is known in closed form.
* ``knapsack`` - bi-objective 0/1 knapsack (maximize value, minimize weight);
  the front of small instances comes from exhaustive enumeration.
* ``resonator`` / ``resonator_size`` - a synthetic complex symmetric linear
  system on a pixel grid with one driven port.  Objectives mimic a quality
  factor, port mismatch, shape regularity and circumscribing size.

All objectives are minimized.  Problems are pure functions of
``(genome, instance)``; instances are rebuilt from a small descriptor
(name, seed, size) and never serialized as raw matrices.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ContractError
from .genome import (ElementGeometry, Genome, RadiusTracker, build_distance_matrix,
                     circumscribing_radius, pixel_grid_geometry)
from .localsearch import SINGULAR_TOL, InverseState, SingularUpdate

log = logging.getLogger(__name__)


class Problem:
    name = "problem"
    n_objectives = 2

    def __init__(self, n_dof: int, seed: int = 0, fixed_mask=None):
        self.n_dof = int(n_dof)
        self.seed = int(seed)
        mask = (np.zeros(self.n_dof, bool) if fixed_mask is None
                else np.array(fixed_mask, bool))
        mask.flags.writeable = False
        self.fixed_mask = mask
        self.free = np.flatnonzero(~mask)

    # subclasses provide evaluate_batch
    def evaluate_batch(self, B: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, g) -> np.ndarray:
        bits = g.bits if isinstance(g, Genome) else np.asarray(g, bool)
        return self.evaluate_batch(bits[None, :])[0]

    def open_session(self, bits, objectives=None) -> "FlipSession":
        return FlipSession(self, bits, objectives)

    def random_genome(self, rng: np.random.Generator) -> Genome:
        bits = (rng.random(self.n_dof) < 0.5) | self.fixed_mask
        return Genome._trusted(bits, self.fixed_mask, self.free)

    def reference_point(self) -> np.ndarray:
        """Fixed nadir reference used for hypervolume traces."""
        raise NotImplementedError

    def true_front(self) -> np.ndarray | None:
        return None

    @property
    def descriptor(self) -> dict:
        return {"name": self.name, "seed": self.seed, **self.size_params}

    @property
    def size_params(self) -> dict:
        return {"n": self.n_dof}


class FlipSession:
    """Current genome plus objectives of all its one-flip neighbours, by re-evaluation."""

    def __init__(self, problem: Problem, bits, objectives=None):
        self.problem = problem
        self.bits = np.asarray(bits, bool).copy()
        self.objectives = (problem.evaluate_batch(self.bits[None])[0] if objectives is None
                           else np.asarray(objectives, float).copy())

    def candidate_objectives(self, ks) -> np.ndarray:
        ks = np.asarray(ks, int)
        B = np.repeat(self.bits[None], ks.size, axis=0)
        B[np.arange(ks.size), ks] ^= True
        return self.problem.evaluate_batch(B)

    def apply(self, k: int, objectives):
        self.bits[k] = ~self.bits[k]
        self.objectives = np.asarray(objectives, float).copy()


class LOTZ(Problem):
    name = "lotz"
    n_objectives = 2

    def evaluate_batch(self, B):
        B = np.asarray(B, bool)
        k, n = B.shape
        # sentinel columns make argmin/argmax return n for all-ones / all-zeros rows
        padded = np.empty((k, n + 1), bool)
        padded[:, :n] = B
        padded[:, n] = False
        lo = np.argmin(padded, axis=1)
        padded[:, :n] = B[:, ::-1]
        padded[:, n] = True
        tz = np.argmax(padded, axis=1)
        out = np.empty((k, 2))
        out[:, 0] = n - lo
        out[:, 1] = n - tz
        return out

    def reference_point(self):
        return np.full(2, self.n_dof + 1.0)

    def true_front(self):
        k = np.arange(self.n_dof + 1)
        return np.stack([self.n_dof - k, k], axis=1).astype(float)

    def front_genomes(self) -> list[Genome]:
        n = self.n_dof
        return [Genome(np.arange(n) < k) for k in range(n + 1)]


class Knapsack(Problem):
    name = "knapsack"
    n_objectives = 2

    def __init__(self, n_dof: int, seed: int = 0, values=None, weights=None):
        super().__init__(n_dof, seed)
        rng = np.random.default_rng(seed)
        self.values = (rng.integers(10, 101, n_dof) if values is None
                       else np.asarray(values)).astype(float)
        self.weights = (rng.integers(10, 101, n_dof) if weights is None
                        else np.asarray(weights)).astype(float)
        if self.values.size != n_dof or self.weights.size != n_dof:
            raise ContractError("item counts must match n_dof")

    def evaluate_batch(self, B):
        B = np.asarray(B, float)
        return np.stack([-(B @ self.values), B @ self.weights], axis=1)

    def reference_point(self):
        return np.array([1.0, self.weights.sum() + 1.0])

    def true_front(self):
        return self._front

    @cached_property
    def _front(self) -> np.ndarray:
        if self.n_dof > 24:
            raise ConfigurationError("exhaustive front only for n <= 24")
        return enumerate_front(self)


def enumerate_front(problem: Problem, chunk: int = 1 << 16) -> np.ndarray:
    """Pareto front of a two-objective problem by evaluating all 2^n genomes."""
    n = problem.n_dof
    shifts = np.arange(n)
    parts = []
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n))
        B = ((idx[:, None] >> shifts) & 1).astype(bool)
        if problem.fixed_mask.any():
            B = B[np.all(B[:, problem.fixed_mask], axis=1)]
        parts.append(problem.evaluate_batch(B))
    from .metrics import nondominated_points
    return nondominated_points(np.concatenate(parts))


@dataclass(frozen=True, eq=False)
class ResonatorSystem:
    Z: np.ndarray
    W_e: np.ndarray
    R_m: np.ndarray
    V: np.ndarray
    port: int
    Z0: float
    geometry: ElementGeometry
    nx: int
    ny: int


def make_resonator_system(nx: int, ny: int, seed: int, Z0: float = 20.0,
                          port: int | None = None) -> ResonatorSystem:
    """Seeded synthetic impedance-like system on an ``nx`` by ``ny`` pixel grid.

    ``Z = R_m + jX``.  The reactance is a distance-decaying inductive coupling
    minus a seeded capacitive self term, so shapes pass through resonances.
    ``R_m`` is a smooth Gaussian kernel (coherent currents radiate more) plus
    a small ohmic diagonal, hence positive definite; every principal
    submatrix of ``Z`` inherits a positive definite real part and is
    nonsingular.  ``W_e`` adds the two reactive energies.
    """
    geom = pixel_grid_geometry(nx, ny)
    centers = geom.vertices.mean(axis=1)[:, :2]
    n = nx * ny
    d = np.linalg.norm(centers[:, None] - centers[None], axis=2)
    rng = np.random.default_rng(seed)
    jitter = rng.normal(size=(n, n))
    jitter = 1.0 + 0.1 * (jitter + jitter.T) / np.sqrt(2)
    L = 40.0 * np.exp(-d / 1.2) * jitter
    np.fill_diagonal(L, 40.0)
    c_self = 60.0 * (1.0 + 0.3 * rng.random(n))
    X = L - np.diag(c_self)
    R_m = 8.0 * np.exp(-(d / 5.0) ** 2) + 0.3 * np.eye(n)
    W_e = np.abs(L) + np.diag(c_self)
    Z = R_m + 1j * X
    if port is None:
        port = nx // 2  # middle of the long bottom edge
    V = np.zeros(n, complex)
    V[port] = 1.0
    if np.linalg.cond(Z) > 1e6:
        raise ConfigurationError("generated system is ill-conditioned")
    return ResonatorSystem(Z, W_e, R_m, V, int(port), float(Z0), geom, nx, ny)


def grid_neighbor_pairs(nx: int, ny: int) -> np.ndarray:
    idx = np.arange(nx * ny).reshape(ny, nx)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([horiz, vert])


class Resonator(Problem):
    """Synthetic linear-system problem.

    ``variant="B"``: (normalized Q, |Gamma|^2, regularity) - three objectives.
    ``variant="A"``: (normalized Q, circumscribing radius / design radius).
    """

    def __init__(self, nx: int = 16, ny: int = 8, seed: int = 0, variant: str = "B",
                 Z0: float = 20.0):
        if variant not in ("A", "B"):
            raise ConfigurationError(f"unknown resonator variant {variant!r}")
        self.system = make_resonator_system(nx, ny, seed, Z0)
        mask = np.zeros(nx * ny, bool)
        mask[self.system.port] = True
        super().__init__(nx * ny, seed, mask)
        self.variant = variant
        self.name = "resonator" if variant == "B" else "resonator_size"
        self.n_objectives = 3 if variant == "B" else 2
        self.D = build_distance_matrix(self.system.geometry)
        self.a0 = circumscribing_radius(np.ones(self.n_dof, bool), self.D)
        self.pairs = grid_neighbor_pairs(nx, ny)
        self.nbrs = [[] for _ in range(self.n_dof)]
        for p, q in self.pairs:
            self.nbrs[p].append(q)
            self.nbrs[q].append(p)
        self.nbr_matrix = np.zeros((self.n_dof, self.n_dof), bool)
        self.nbr_matrix[self.pairs[:, 0], self.pairs[:, 1]] = True
        self.nbr_matrix |= self.nbr_matrix.T
        self.q_norm = 1.0
        full = np.ones(self.n_dof, bool)
        self.q_norm = self._raw_q(full)
        self.sentinel = 10.0 * np.maximum(self._direct(full), self._direct(mask))
        self.sentinel = np.maximum(self.sentinel, 1.0)
        self.q_port_only = self._raw_q(mask) / self.q_norm

    @property
    def size_params(self):
        return {"nx": self.system.nx, "ny": self.system.ny, "Z0": self.system.Z0}

    def reference_point(self):
        # objectives past these bounds score no volume in traces
        q_ref = max(2.0, 1.1 * self.q_port_only)
        if self.variant == "B":
            return np.array([q_ref, 1.0, 0.45])
        return np.array([q_ref, 1.1])

    # direct path

    def solve(self, bits) -> np.ndarray:
        """Full-length current vector; zero on inactive elements."""
        bits = np.asarray(bits, bool)
        if not bits[self.system.port]:
            raise ContractError("driven port must be active")
        idx = np.flatnonzero(bits)
        Zg = self.system.Z[np.ix_(idx, idx)]
        I = np.zeros(self.n_dof, complex)
        I[idx] = np.linalg.solve(Zg, self.system.V[idx])
        return I

    def _raw_q(self, bits) -> float:
        I = self.solve(bits)
        return quality_factor(I, self.system.W_e, self.system.R_m)

    def _direct(self, bits) -> np.ndarray:
        try:
            I = self.solve(bits)
        except np.linalg.LinAlgError:
            log.debug("singular reduced system; sentinel objectives")
            return self.sentinel.copy()
        return self._objectives_from(I[None, :], np.asarray(bits, bool)[None, :])[0]

    def evaluate_batch(self, B):
        B = np.asarray(B, bool)
        return np.array([self._direct(b) for b in B])

    def _objectives_from(self, X: np.ndarray, B: np.ndarray, radius=None) -> np.ndarray:
        sys_ = self.system
        q = quality_factor_rows(X, sys_.W_e, sys_.R_m) / self.q_norm
        if self.variant == "A":
            if radius is None:
                radius = np.array([circumscribing_radius(b, self.D) for b in B])
            return np.stack([q, radius / self.a0], axis=1)
        gamma2 = reflection_power(X[:, sys_.port], sys_.V[sys_.port], sys_.Z0)
        reg = self.regularity_rows(B)
        return np.stack([q, gamma2, reg], axis=1)

    def regularity_rows(self, B) -> np.ndarray:
        B = np.asarray(B, bool)
        area = B.mean(axis=1)
        h = (B[:, self.pairs[:, 0]] != B[:, self.pairs[:, 1]]).mean(axis=1)
        return 0.15 * area + 0.30 * h

    def objective_q(self, g) -> float:
        return self._raw_q(_bits(g)) / self.q_norm

    def objective_gamma(self, g) -> float:
        I = self.solve(_bits(g))
        p = self.system.port
        return float(reflection_power(I[p:p + 1], self.system.V[p], self.system.Z0)[0])

    def objective_size(self, g) -> float:
        return circumscribing_radius(_bits(g), self.D) / self.a0

    def objective_regularity(self, g) -> float:
        return float(self.regularity_rows(_bits(g)[None])[0])

    def open_session(self, bits, objectives=None):
        return ResonatorSession(self, bits, objectives)


def _bits(g) -> np.ndarray:
    return g.bits if isinstance(g, Genome) else np.asarray(g, bool)


def quality_factor(I, W_e, R_m) -> float:
    return float(quality_factor_rows(np.asarray(I)[None, :], W_e, R_m)[0])


def quality_factor_rows(X, W_e, R_m) -> np.ndarray:
    """Ratio of two Hermitian quadratic forms, row by row."""
    stored = np.einsum("ij,ij->i", X.conj(), X @ W_e).real
    lost = np.einsum("ij,ij->i", X.conj(), X @ R_m).real
    return stored / lost


def reflection_power(I_in, V_in, Z0) -> np.ndarray:
    """|Gamma|^2 at the port; a vanishing port current counts as total mismatch."""
    I_in = np.asarray(I_in, complex)
    out = np.ones(I_in.shape)
    ok = np.abs(I_in) >= 1e-15
    Zin = V_in / I_in[ok]
    out[ok] = np.abs((Zin - Z0) / (Zin + Z0)) ** 2
    return out


class ResonatorSession:
    """One-flip neighbourhood of a resonator genome through bordered-inverse updates."""

    def __init__(self, problem: Resonator, bits, objectives=None):
        self.problem = problem
        self.bits = np.asarray(bits, bool).copy()
        self.state = InverseState(problem.system.Z, np.flatnonzero(self.bits))
        self.radius = RadiusTracker(problem.D, self.bits) if problem.variant == "A" else None
        self._refresh_current()
        self.objectives = (self._current_objectives() if objectives is None
                           else np.asarray(objectives, float).copy())

    def _refresh_current(self):
        act = self.state.active
        self.I_a = self.state.inv @ self.problem.system.V[act]

    def _current_objectives(self) -> np.ndarray:
        X = np.zeros((1, self.problem.n_dof), complex)
        X[0, self.state.active] = self.I_a
        r = None if self.radius is None else np.array([self.radius.radius])
        return self.problem._objectives_from(X, self.bits[None], r)[0]

    def candidate_objectives(self, ks) -> np.ndarray:
        prob = self.problem
        Z = prob.system.Z
        V = prob.system.V
        ks = np.asarray(ks, int)
        act = np.array(self.state.active)
        inv = self.state.inv
        n = prob.n_dof
        X = np.zeros((ks.size, n), complex)
        ok = np.ones(ks.size, bool)
        adding = ~self.bits[ks]
        pos_of = {a: i for i, a in enumerate(act)}

        rem = np.flatnonzero(~adding)
        if rem.size:
            pos = np.array([pos_of[k] for k in ks[rem]])
            d = inv[pos, pos]
            good = np.abs(d) >= SINGULAR_TOL
            ok[rem[~good]] = False
            coef = np.where(good, self.I_a[pos] / np.where(good, d, 1.0), 0.0)
            cur = self.I_a[None, :] - inv[:, pos].T * coef[:, None]
            cur[np.arange(rem.size), pos] = 0.0
            X[np.ix_(rem, act)] = cur

        add = np.flatnonzero(adding)
        if add.size:
            kk = ks[add]
            Bcol = Z[np.ix_(act, kk)]  # (na, r)
            U = inv @ Bcol
            Crow = Z[np.ix_(kk, act)]  # (r, na)
            s = Z[kk, kk] - np.einsum("ij,ji->i", Crow, U)
            good = np.abs(s) >= SINGULAR_TOL
            ok[add[~good]] = False
            y = (V[kk] - Crow @ self.I_a) / np.where(good, s, 1.0)
            X[np.ix_(add, act)] = self.I_a[None, :] - U.T * y[:, None]
            X[add, kk] = y

        B = np.repeat(self.bits[None], ks.size, axis=0)
        B[np.arange(ks.size), ks] ^= True
        radius = None
        if self.radius is not None:
            radius = np.empty(ks.size)
            if add.size:
                radius[add] = self.radius.radius_after_add(ks[add])
            if rem.size:
                radius[rem] = self.radius.radius_after_remove(ks[rem])
        out = prob._objectives_from(X, B, radius)
        out[~ok] = prob.sentinel
        return out

    def apply(self, k: int, objectives=None):
        try:
            if self.bits[k]:
                self.state.remove_inplace(k)
            else:
                self.state.add_inplace(k)
        except SingularUpdate:
            self.state = InverseState(self.problem.system.Z,
                                      np.flatnonzero(self.bits ^ (np.arange(self.bits.size) == k)))
        self.bits[k] = ~self.bits[k]
        if self.radius is not None:
            self.radius.flip(k)
        self._refresh_current()
        self.objectives = self._current_objectives()


PROBLEMS = ("lotz", "knapsack", "resonator", "resonator_size")


def make_instance(name: str, seed: int = 0, **size) -> Problem:
    """Deterministic instance from (name, seed, size)."""
    if name == "lotz":
        return LOTZ(int(size.get("n", 16)), seed)
    if name == "knapsack":
        return Knapsack(int(size.get("n", 20)), seed)
    if name in ("resonator", "resonator_size"):
        variant = "B" if name == "resonator" else "A"
        return Resonator(int(size.get("nx", 16)), int(size.get("ny", 8)), seed, variant,
                         float(size.get("Z0", 20.0)))
    raise ConfigurationError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")


def instance_from_descriptor(desc: dict) -> Problem:
    desc = dict(desc)
    name = desc.pop("name")
    seed = desc.pop("seed", 0)
    return make_instance(name, seed, **desc)


def save_descriptor(problem: Problem, path: str | Path):
    Path(path).write_text(json.dumps(problem.descriptor, indent=2))


def load_descriptor(path: str | Path) -> Problem:
    return instance_from_descriptor(json.loads(Path(path).read_text()))
