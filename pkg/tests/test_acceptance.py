"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Several criteria run full-size experiments (tens of minutes in total on one core).
"""

import math
from pathlib import Path

import numpy as np
import pytest

from moma.cli import main
from moma.engine import RunConfig, run_moma_aw, run_nsga2, run_soga_fw
from moma.localsearch import InverseState, taper_schedule
from moma.metrics import generational_distance, hypervolume, hypervolume_mc, nondominated_filter
from moma.problems import LOTZ, make_instance
from moma.weights import WeightSet, aperture_angle, assign_weights_to_solutions, simplex_lattice

README = Path(__file__).resolve().parents[1] / "README.md"


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


# ---------------------------------------------------------------- AC1

def test_ac1_lotz_oracle_exactness(report):
    prob = LOTZ(16)
    true = prob.true_front()
    exact, slow, worst = 0, 0, 0.0
    for seed in range(30):
        res = run_moma_aw(RunConfig(problem={"name": "lotz", "seed": 0, "n": 16}, seed=seed), prob)
        F = res.archive.objectives
        full = len(F) == 17 and generational_distance(F, true) == 0.0 and \
            sorted(map(tuple, F)) == sorted(map(tuple, true))
        exact += full
        slow += res.wall_time >= 10.0
        worst = max(worst, res.wall_time)
    ok = exact >= 28 and slow == 0
    report("AC1", ok, f"{exact}/30 runs recovered all 17 front points with GD = 0; "
                      f"slowest run {worst:.2f} s (limit 10 s)")
    assert ok


# ---------------------------------------------------------------- AC2

def test_ac2_algorithm_ordering_knapsack(report):
    prob = make_instance("knapsack", 0, n=20)
    true = prob.true_front()
    base = RunConfig(problem={"name": "knapsack", "seed": 0, "n": 20})
    gd = {"MOMA-AW": [], "NSGA-II": [], "SOGA-FW": []}
    nnd = {"MOMA-AW": [], "NSGA-II": [], "SOGA-FW": []}
    for seed in range(30):
        cfg = base.replace(seed=seed)
        moma = run_moma_aw(cfg, prob)
        # equal evaluation budget: the baselines stop at the first generation
        # barrier past MOMA-AW's total
        budget = cfg.replace(max_evaluations=moma.evaluations, N_I=10**7)
        nsga = run_nsga2(budget, prob)
        soga = run_soga_fw(budget.replace(soga_k=8, soga_budget="shared"), prob)
        for name, res in (("MOMA-AW", moma), ("NSGA-II", nsga), ("SOGA-FW", soga)):
            gd[name].append(generational_distance(res.archive.objectives, true))
            nnd[name].append(len(res.archive))
    m = {k: float(np.mean(v)) for k, v in gd.items()}
    n = {k: float(np.mean(v)) for k, v in nnd.items()}
    gd_ok = m["MOMA-AW"] <= 0.5 * m["NSGA-II"]
    nnd_ok = n["MOMA-AW"] > n["SOGA-FW"]
    note = ""
    if m["NSGA-II"] == 0:
        note = (" (GD clause holds with equality: both means are 0)" if gd_ok else
                " (NSGA-II reached GD = 0 in every run, so the GD clause needs MOMA-AW GD = 0 too)")
    report("AC2", gd_ok and nnd_ok,
           f"mean GD MOMA-AW {m['MOMA-AW']:.4g} vs NSGA-II {m['NSGA-II']:.4g} (SOGA-FW "
           f"{m['SOGA-FW']:.4g}); mean N_nd MOMA-AW {n['MOMA-AW']:.2f} vs SOGA-FW "
           f"{n['SOGA-FW']:.2f} (NSGA-II {n['NSGA-II']:.2f}; true front {len(true)}){note}")
    assert gd_ok and nnd_ok


# ---------------------------------------------------------------- AC3

def test_ac3_runtime_ordering(report):
    prob = make_instance("resonator", 0)  # 16 x 8 pixels, three objectives
    cfg = RunConfig(problem={"name": "resonator", "seed": 0}, seed=0)
    moma = run_moma_aw(cfg, prob)
    soga = run_soga_fw(cfg.replace(soga_k=8, soga_budget="full"), prob)
    ratio = soga.wall_time / moma.wall_time
    ok = ratio >= 3.0
    report("AC3", ok, f"resonator 16x8: SOGA-FW K=8 full budget {soga.wall_time:.1f} s "
                      f"({soga.evaluations} evaluations) vs MOMA-AW {moma.wall_time:.1f} s "
                      f"({moma.evaluations} evaluations); ratio {ratio:.2f} (need >= 3)")
    assert ok


# ---------------------------------------------------------------- AC4

def _random_front(rng, n, M):
    X = rng.random((n, M))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return 1.0 - X * rng.uniform(0.3, 1.0)


def test_ac4_metrics_correctness(report):
    rng = np.random.default_rng(4)
    hv_ok = 0
    worst_z = 0.0
    for i in range(100):
        M = 2 if i < 50 else 3
        F = _random_front(rng, int(rng.integers(2, 15)), M)
        ref = np.ones(M)
        exact = hypervolume(F, ref)
        est, se = hypervolume_mc(F, ref, n_samples=1_000_000, rng=rng)
        z = abs(exact - est) / se if se > 0 else 0.0
        worst_z = max(worst_z, z)
        hv_ok += z <= 3.0

    gd_err = 0.0
    for _ in range(50):
        true = rng.random((int(rng.integers(5, 80)), 2))
        G = rng.random((int(rng.integers(1, 50)), 2))
        total = 0.0
        for g in G:
            total += min(math.dist(g, t) ** 2 for t in true)
        oracle = math.sqrt(total) / len(G)
        gd_err = max(gd_err, abs(generational_distance(G, true, normalize=False) - oracle))

    nd_ok = 0
    for _ in range(1000):
        n, M = int(rng.integers(1, 40)), int(rng.integers(2, 5))
        F = rng.integers(0, 8, size=(n, M)).astype(float)
        oracle = set()
        for a in F:
            if not any(all(b <= a) and any(b < a) for b in F):
                oracle.add(tuple(a))
        nd_ok += set(map(tuple, nondominated_filter(F).objectives)) == oracle
    ok = hv_ok == 100 and gd_err <= 1e-12 and nd_ok == 1000
    report("AC4", ok, f"HV exact vs 1e6-sample MC within 3 SE on {hv_ok}/100 fronts (max "
                      f"{worst_z:.2f} SE); max GD error {gd_err:.1e}; nondominated filter "
                      f"matches pairwise oracle on {nd_ok}/1000 populations")
    assert ok


# ---------------------------------------------------------------- AC5

def _oracle_assignment(F, W):
    """Normalize, take angles with plain math, then strike the global minimum repeatedly."""
    n, M = len(F), len(F[0])
    lo = [min(f[m] for f in F) for m in range(M)]
    hi = [max(f[m] for f in F) for m in range(M)]
    Fh = [[(f[m] - lo[m]) / (hi[m] - lo[m] + 1.0) for m in range(M)] for f in F]
    A = []
    for f in Fh:
        row = []
        for w in W:
            nf = math.sqrt(sum(x * x for x in f))
            nw = math.sqrt(sum(x * x for x in w))
            if nf == 0:
                row.append(0.0)
                continue
            c = sum(x * y for x, y in zip(f, w)) / (nf * nw)
            row.append(math.acos(max(-1.0, min(1.0, c))))
        A.append(row)
    rows, cols, out = set(range(n)), set(range(len(W))), [None] * n
    while rows:
        best = min((A[i][j], i, j) for i in rows for j in cols)
        _, i, j = best
        out[i] = j
        rows.discard(i)
        cols.discard(j)
    return out


def test_ac5_weight_machinery(report):
    W = simplex_lattice(3, 66).vectors
    sums_ok = len(W) == 66 and np.all(np.abs(W.sum(axis=1) - 1.0) <= 1e-12)
    units_ok = all(any(np.array_equal(w, e) for w in W) for e in np.eye(3))
    xi2, xi3 = aperture_angle(2), aperture_angle(3)
    ap_ok = abs(xi2 - 0.030159) <= 1e-4 and abs(xi3 - 0.070407) <= 1e-4
    rng = np.random.default_rng(5)
    match = 0
    for _ in range(500):
        M = int(rng.integers(2, 4))
        F = rng.random((8, M)) * rng.uniform(0.5, 20, size=M)
        Wv = rng.dirichlet(np.ones(M), size=8)
        perm = assign_weights_to_solutions(F, WeightSet(Wv), F.min(axis=0), F.max(axis=0))
        match += perm.tolist() == _oracle_assignment(F.tolist(), Wv.tolist())
    ok = sums_ok and units_ok and ap_ok and match == 500
    report("AC5", ok, f"lattice(3,66): {len(W)} vectors, sums within 1e-12 {sums_ok}, unit "
                      f"vectors present {units_ok}; aperture M=2 {xi2:.6f}, M=3 {xi3:.6f}; "
                      f"assignment matches striking oracle on {match}/500 instances")
    assert ok


# ---------------------------------------------------------------- AC6

def test_ac6_rank1_solver(report):
    worst_walk, worst_trip = 0.0, 0.0
    for seed in range(3):
        rng = np.random.default_rng(60 + seed)
        A = rng.normal(size=(100, 100)) + 1j * rng.normal(size=(100, 100))
        Z = A + A.T + 40.0 * np.eye(100)
        state = InverseState(Z, rng.permutation(100)[:50])
        for _ in range(200):
            act = set(state.active)
            if rng.random() < 0.5 and len(act) > 1:
                state.remove_inplace(int(rng.choice(sorted(act))))
            else:
                state.add_inplace(int(rng.choice(sorted(set(range(100)) - act))))
            direct = np.linalg.inv(state.reduced())
            worst_walk = max(worst_walk,
                             np.linalg.norm(state.inv - direct) / np.linalg.norm(direct))
        for _ in range(20):
            before = state.inv.copy()
            k = int(rng.choice(sorted(set(range(100)) - set(state.active))))
            state.add_inplace(k)
            state.remove_inplace(k)
            worst_trip = max(worst_trip,
                             np.linalg.norm(state.inv - before) / np.linalg.norm(before))
    ok = worst_walk <= 1e-8 and worst_trip <= 1e-10
    report("AC6", ok, f"max relative Frobenius error over 3x200 updates {worst_walk:.1e} "
                      f"(limit 1e-8); add-then-remove {worst_trip:.1e} (limit 1e-10)")
    assert ok


# ---------------------------------------------------------------- AC7

EPS_STRATEGIES = {"taper 1e-3 -> 1e-6": ("taper", 1e-3, 1e-6),
                  "constant 1e-3": ("constant", 1e-3, 1e-3),
                  "constant 1e-6": ("constant", 1e-6, 1e-6)}


def _hv_at(trace, budget):
    vals = [row["hv"] for row in trace if row["perturbations"] <= budget]
    return vals[-1] if vals else 0.0


def test_ac7_taper_schedule(report, tmp_path):
    ends_ok = (all(taper_schedule(t) == 1e-3 for t in range(1, 10))
               and taper_schedule(30) == 1e-6)
    prob = make_instance("resonator", 0, nx=8, ny=4)
    base = RunConfig(problem={"name": "resonator", "seed": 0, "nx": 8, "ny": 4})
    wins = strict = 0
    final_wins = 0
    for seed in range(30):
        traces = {}
        for label, (kind, hi, lo) in EPS_STRATEGIES.items():
            res = run_moma_aw(base.replace(seed=seed, eps_kind=kind, eps_hi=hi, eps_lo=lo), prob)
            traces[label] = res.trace
        # traces are written for external plotting (HV against perturbations)
        for label, trace in traces.items():
            stem = label.split()[0] + label.split()[-1].replace("-", "m")
            with open(tmp_path / f"seed{seed}_{stem}.csv", "w") as fh:
                fh.write("perturbations,hv\n")
                fh.writelines(f"{r['perturbations']},{r['hv']!r}\n" for r in trace)
        budget = min(t[-1]["perturbations"] for t in traces.values())
        hv = {k: _hv_at(t, budget) for k, t in traces.items()}
        taper, others = hv["taper 1e-3 -> 1e-6"], [v for k, v in hv.items() if not k.startswith("taper")]
        wins += taper >= max(others)
        strict += taper > max(others)
        fin = {k: t[-1]["hv"] for k, t in traces.items()}
        final_wins += fin["taper 1e-3 -> 1e-6"] >= max(v for k, v in fin.items() if not k.startswith("taper"))
    ok = ends_ok and wins >= 20
    report("AC7", ok, f"schedule endpoints exact {ends_ok}; taper has the highest HV at the common "
                      f"perturbation budget in {wins}/30 resonator runs ({strict} strictly), need 20; "
                      f"highest HV after 40 iterations in {final_wins}/30")
    assert ok


# ---------------------------------------------------------------- AC8

AC8_CONFIGS = [
    "problem = knapsack\nn = 20\nseed = 3\n",
    "problem = resonator\nnx = 6\nny = 4\nN_A = 16\nN_I = 6\nseed = 1\n",
    "problem = lotz\nn = 16\nalgorithm = SOGA-FW\nsoga_k = 4\nN_A = 16\nN_I = 8\nseed = 2\n",
    "problem = knapsack\nn = 16\nalgorithm = NSGA-II\nN_I = 20\nseed = 4\n",
]


def test_ac8_determinism(report, tmp_path):
    identical = 0
    for i, text in enumerate(AC8_CONFIGS):
        cfg = tmp_path / f"c{i}.cfg"
        cfg.write_text(text)
        blobs = []
        for label, threads in (("a", 1), ("b", 1), ("t4", 4), ("t8", 8)):
            out = tmp_path / f"c{i}_{label}"
            assert main(["run", "--config", str(cfg), "--threads", str(threads),
                         "--out", str(out)]) == 0
            fronts = sorted(out.glob("*_front.csv"))
            blobs.append(b"".join(p.read_bytes() for p in fronts))
        identical += all(b == blobs[0] for b in blobs)
    ok = identical == len(AC8_CONFIGS)
    report("AC8", ok, f"{identical}/{len(AC8_CONFIGS)} configurations gave byte-identical front "
                      f"CSVs across two invocations and thread counts 1, 4, 8")
    assert ok


# ---------------------------------------------------------------- AC9

def test_ac9_non_claims_documented(report):
    text = README.read_text().lower()
    stated = all(phrase in text for phrase in ("not reproduc", "q-factor", "synthetic"))
    desc = make_instance("resonator", 0).descriptor
    synthetic = set(desc) <= {"name", "seed", "nx", "ny", "Z0", "variant"}
    ok = stated and synthetic
    report("AC9", ok, "non-claims stated in README (absolute Q values, antenna shapes, solver "
                      f"cross-checks) {stated}; resonator instances are seeded synthetic "
                      f"systems described only by {sorted(desc)}")
    assert ok
