import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moma.errors import ConfigurationError, ContractError
from moma.genome import Genome
from moma.metrics import nondominated_points
from moma.problems import (LOTZ, PROBLEMS, Knapsack, Resonator, load_descriptor, make_instance,
                           quality_factor, reflection_power, save_descriptor)


@pytest.fixture(scope="module")
def res_b():
    return Resonator(16, 8, seed=3)


@pytest.fixture(scope="module")
def res_a():
    return Resonator(8, 4, seed=1, variant="A")


def brute_front(problem):
    """Pareto set of all 2^n objective vectors by pairwise comparison."""
    n = problem.n_dof
    F = np.unique([problem.evaluate(np.array(b, bool))
                   for b in itertools.product([0, 1], repeat=n)], axis=0)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)  # column j dominated by some row i
    return F[~dominated]


# ---------------------------------------------------------------- LOTZ

def test_lotz_examples():
    p = LOTZ(4)
    assert p.evaluate(Genome.from_string("1100")).tolist() == [2, 2]
    assert p.evaluate(Genome.from_string("1111")).tolist() == [0, 4]
    assert p.evaluate(Genome.from_string("0000")).tolist() == [4, 0]
    assert p.evaluate(Genome.from_string("1010")).tolist() == [3, 3]


def test_lotz_front_matches_enumeration():
    p = LOTZ(4)
    assert brute_front(p).tolist() == [[0, 4], [1, 3], [2, 2], [3, 1], [4, 0]]
    assert sorted(map(tuple, p.true_front())) == sorted(map(tuple, brute_front(p)))
    for g, f in zip(p.front_genomes(), p.true_front()):
        assert p.evaluate(g).tolist() == f.tolist()


# ---------------------------------------------------------------- knapsack

def test_knapsack_examples():
    p = Knapsack(5, values=[10, 20, 30, 40, 50], weights=[1, 2, 3, 4, 5])
    assert p.evaluate(np.zeros(5, bool)).tolist() == [0, 0]
    assert p.evaluate(np.ones(5, bool)).tolist() == [-150, 15]
    with pytest.raises(ContractError):
        Knapsack(3, values=[1, 2], weights=[1, 2, 3])


def test_knapsack_front_equals_brute_force():
    p = Knapsack(12, seed=4)
    assert np.array_equal(p.true_front(), brute_front(p))


def test_batch_matches_single():
    rng = np.random.default_rng(0)
    for p in (LOTZ(9), Knapsack(9, seed=2)):
        B = rng.random((20, 9)) < 0.5
        assert np.array_equal(p.evaluate_batch(B), np.array([p.evaluate(b) for b in B]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_flip_session_matches_evaluate(seed):
    rng = np.random.default_rng(seed)
    p = Knapsack(10, seed=seed % 13)
    bits = rng.random(10) < 0.5
    s = p.open_session(bits)
    for _ in range(5):
        ks = np.arange(10)
        C = s.candidate_objectives(ks)
        for k in ks:
            b = s.bits.copy()
            b[k] = ~b[k]
            assert np.array_equal(C[k], p.evaluate(b))
        k = int(rng.integers(10))
        s.apply(k, C[k])
        assert np.array_equal(s.objectives, p.evaluate(s.bits))


# ---------------------------------------------------------------- resonator helpers

def test_reflection_examples():
    assert reflection_power([1 / 20], 1.0, 20.0)[0] == pytest.approx(0.0, abs=1e-30)
    assert reflection_power([1e-9], 1.0, 20.0)[0] == pytest.approx(1.0, abs=1e-6)
    assert reflection_power([0.0], 1.0, 20.0)[0] == 1.0
    assert reflection_power([1 / 60], 1.0, 20.0)[0] == pytest.approx(0.25)


def test_quality_factor_ratio():
    I = np.array([1.0, 1j])
    assert quality_factor(I, np.diag([3.0, 1.0]), np.eye(2)) == pytest.approx(2.0)


def test_scalar_and_diagonal_solve(res_b):
    sys_ = res_b.system
    p = sys_.port
    bits = np.zeros(res_b.n_dof, bool)
    bits[p] = True
    I = res_b.solve(bits)
    assert I[p] == pytest.approx(1.0 / sys_.Z[p, p], rel=1e-14)
    assert np.count_nonzero(I) == 1
    with pytest.raises(ContractError):
        res_b.solve(np.ones(res_b.n_dof, bool) & (np.arange(res_b.n_dof) != p))


def test_random_subset_residual(res_b):
    rng = np.random.default_rng(8)
    p = res_b.system.port
    idx = np.union1d(rng.choice(res_b.n_dof, 29, replace=False), [p])
    bits = np.zeros(res_b.n_dof, bool)
    bits[idx] = True
    I = res_b.solve(bits)
    Zg = res_b.system.Z[np.ix_(idx, idx)]
    Vg = res_b.system.V[idx]
    assert np.linalg.norm(Zg @ I[idx] - Vg) / np.linalg.norm(Vg) <= 1e-10


def test_system_structure(res_b):
    sys_ = res_b.system
    assert np.array_equal(sys_.Z, sys_.Z.T)
    assert np.all(np.linalg.eigvalsh(sys_.R_m) > 0)
    assert np.all(np.linalg.eigvalsh(sys_.W_e) > -1e-9)
    assert res_b.fixed_mask[sys_.port] and res_b.fixed_mask.sum() == 1
    assert np.linalg.cond(sys_.Z) <= 1e6


def test_resonator_instance_shape(res_b):
    assert res_b.n_objectives == 3 and res_b.n_dof == 128
    full = np.ones(128, bool)
    assert res_b.objective_q(full) == pytest.approx(1.0, rel=1e-12)
    assert res_b.objective_regularity(full) >= 0.15


def test_objectives_match_direct_recomputation(res_b):
    rng = np.random.default_rng(4)
    sys_ = res_b.system
    for _ in range(5):
        g = res_b.random_genome(rng)
        idx = np.flatnonzero(g.bits)
        I = np.zeros(128, complex)
        I[idx] = np.linalg.solve(sys_.Z[np.ix_(idx, idx)], sys_.V[idx])
        q = (I.conj() @ sys_.W_e @ I).real / (I.conj() @ sys_.R_m @ I).real
        zin = 1.0 / I[sys_.port]
        gam = abs((zin - sys_.Z0) / (zin + sys_.Z0)) ** 2
        f = res_b.evaluate(g)
        assert f[0] == pytest.approx(q / res_b.q_norm, rel=1e-10)
        assert f[1] == pytest.approx(gam, rel=1e-10, abs=1e-14)
        assert f[0] == pytest.approx(res_b.objective_q(g), rel=1e-12)
        assert f[1] == pytest.approx(res_b.objective_gamma(g), rel=1e-12)
        assert f[2] == res_b.objective_regularity(g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_regularity_range(seed):
    rng = np.random.default_rng(seed)
    p = Resonator.__new__(Resonator)  # geometry-only use of the regularity term
    from moma.problems import grid_neighbor_pairs
    p.pairs = grid_neighbor_pairs(6, 5)
    B = rng.random((10, 30)) < rng.random()
    r = p.regularity_rows(B)
    assert np.all((r >= 0) & (r <= 0.45))


@pytest.mark.parametrize("which", ["res_a", "res_b"])
def test_session_matches_direct(which, request):
    prob = request.getfixturevalue(which)
    rng = np.random.default_rng(12)
    g = prob.random_genome(rng)
    s = prob.open_session(g.bits)
    free = np.flatnonzero(~prob.fixed_mask)
    for _ in range(8):
        C = s.candidate_objectives(free)
        for k in rng.choice(free, 6, replace=False):
            b = s.bits.copy()
            b[k] = ~b[k]
            j = int(np.flatnonzero(free == k)[0])
            assert np.allclose(C[j], prob.evaluate(b), rtol=1e-10, atol=1e-12)
        k = int(rng.choice(free))
        j = int(np.flatnonzero(free == k)[0])
        s.apply(k, C[j])
        assert np.allclose(s.objectives, prob.evaluate(s.bits), rtol=1e-10, atol=1e-12)


def test_size_objective_monotone(res_a):
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = res_a.random_genome(rng)
        free_off = np.flatnonzero(~g.bits)
        if free_off.size:
            k = int(rng.choice(free_off))
            assert res_a.objective_size(g.flipped(k)) >= res_a.objective_size(g)


# ---------------------------------------------------------------- factory

def test_make_instance_and_determinism():
    p = make_instance("lotz", 7, n=16)
    assert p.n_objectives == 2 and not p.fixed_mask.any()
    a, b = make_instance("knapsack", 5, n=10), make_instance("knapsack", 5, n=10)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.weights, b.weights)
    r1, r2 = make_instance("resonator", 2, nx=6, ny=4), make_instance("resonator", 2, nx=6, ny=4)
    assert np.array_equal(r1.system.Z, r2.system.Z)
    assert make_instance("resonator_size", 0, nx=6, ny=4).n_objectives == 2
    with pytest.raises(ConfigurationError):
        make_instance("zdt1")
    assert set(PROBLEMS) == {"lotz", "knapsack", "resonator", "resonator_size"}


def test_default_resonator_is_16_by_8():
    p = make_instance("resonator", 0)
    assert p.n_dof == 128 and p.n_objectives == 3 and p.fixed_mask.sum() == 1


@pytest.mark.parametrize("name,size", [("lotz", {"n": 11}), ("knapsack", {"n": 9}),
                                       ("resonator_size", {"nx": 6, "ny": 3}),
                                       ("resonator", {"nx": 4, "ny": 3, "Z0": 50.0})])
def test_descriptor_round_trip(tmp_path, name, size):
    p = make_instance(name, 4, **size)
    save_descriptor(p, tmp_path / "d.json")
    q = load_descriptor(tmp_path / "d.json")
    assert q.descriptor == p.descriptor
    rng = np.random.default_rng(1)
    B = np.array([p.random_genome(rng).bits for _ in range(5)])
    assert np.array_equal(p.evaluate_batch(B), q.evaluate_batch(B))


def test_true_front_nondominated():
    F = Knapsack(10, seed=1).true_front()
    assert np.array_equal(F, nondominated_points(F))
