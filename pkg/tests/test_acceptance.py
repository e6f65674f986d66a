"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import functools
import sys
import time

import numpy as np
import pytest
import scipy.linalg

from foliation_blowup import blowup as bl
from foliation_blowup import cli
from foliation_blowup import foliation as fo
from foliation_blowup import grassmann as gr
from foliation_blowup import group_action as ga
from foliation_blowup import holonomy as ho
from foliation_blowup.blowup import BlowupPoint, FiberConfig
from foliation_blowup.grassmann import Subspace
from foliation_blowup.scenarios import BUILTINS, builtin, sl2_action, gl2_action

from conftest import record_acceptance

LINEAR = ("sl2", "sln", "gl2", "so2", "torus")
FIBER_RAYS = 32


def exact_null(m):
    return gr.orthonormalize(scipy.linalg.null_space(m), 1e-12) if m.size else Subspace.full(m.shape[1])


@functools.lru_cache(maxsize=None)
def cached_builtin(name):
    return builtin(name)


@functools.lru_cache(maxsize=None)
def cached_fiber(name, idx):
    b = cached_builtin(name)
    x = b.points[idx]
    return x, bl.blowup_fiber(b.foliation, x, FiberConfig(rays=FIBER_RAYS))


def all_fibers():
    for name in BUILTINS:
        for idx in range(len(cached_builtin(name).points)):
            yield name, *cached_fiber(name, idx)


def test_01_sl2_origin_fiber():
    act = sl2_action()
    t0 = time.perf_counter()
    rep = ga.blowup_fiber_action(act, [0.0, 0.0], FiberConfig(rays=64))
    elapsed = time.perf_counter() - t0
    worst, dims_ok = 0.0, True
    for ray in rep.rays:
        if ray.limit is None:
            dims_ok = False
            continue
        dims_ok &= ray.limit.dim == 1
        worst = max(worst, gr.distance(ray.limit, exact_null(act.anchor(ray.direction))))
    sep = np.inf
    for i, a in enumerate(rep.rays):
        for b in rep.rays[i + 1:]:
            if abs(a.direction @ b.direction) < 1 - 1e-9 and a.limit is not None and b.limit is not None:
                sep = min(sep, gr.distance(a.limit, b.limit))
    ok = dims_ok and len(rep.rays) == 64 and worst < 1e-6 and sep > 1e-3 and elapsed < 10
    record_acceptance(1, ok, f"rays={len(rep.rays)} clusters={len(rep.clusters)} max_dist={worst:.2e} "
                             f"min_sep={sep:.3e} time={elapsed:.2f}s")
    assert ok


def test_02_bump_fiber_table():
    F = cached_builtin("bump").foliation
    cfg = FiberConfig(cluster_tol=1e-3)
    table = {0.0: [0], 1.5: [1], -1.5: [1], 1.0: [0, 1], -1.0: [0, 1]}
    got = {x: sorted(bl.blowup_fiber(F, [x], cfg).dims) for x in table}
    ok = got == table
    record_acceptance(2, ok, " ".join(f"x={x:+.1f}:{got[x]}" for x in table))
    assert ok


def test_03_classical_blowup():
    F = cached_builtin("vanish_origin").foliation
    rep = bl.blowup_fiber(F, [0.0, 0.0], FiberConfig(rays=64))
    worst, dims_ok = 0.0, True
    for ray in rep.rays:
        v = ray.direction
        # c -> L v with L = [[c0, c1], [c2, c3]]
        oracle = exact_null(np.array([[v[0], v[1], 0, 0], [0, 0, v[0], v[1]]]))
        dims_ok &= ray.limit is not None and ray.limit.dim == 2
        if ray.limit is not None:
            worst = max(worst, gr.distance(ray.limit, oracle))
    ok = dims_ok and worst < 1e-6
    record_acceptance(3, ok, f"rays={len(rep.rays)} dims_ok={dims_ok} max_dist={worst:.2e}")
    assert ok


def test_04_proposition_suite():
    clusters, contain_ok, worst_res, regular_pts, regular_ok = 0, True, 0.0, 0, True
    bad = []
    for name, x, rep in all_fibers():
        F = cached_builtin(name).foliation
        props = bl.verify_fiber_properties(F, x, rep)
        clusters += len(rep.clusters)
        contain_ok &= props.containment_ok
        worst_res = max(worst_res, props.subalgebra_residual)
        if fo.regular_test(F, x).is_regular:
            regular_pts += 1
            # {0} in the fiber F_x is the isotropy h_x in generator coordinates
            h = fo.isotropy(F, x)
            single = len(rep.clusters) == 1 and gr.distance(rep.subspaces[0], h) < 1e-6
            quotient_zero = F.k - h.dim == fo.tangent_fiber(F, x).dim
            if not (single and quotient_zero):
                regular_ok = False
                bad.append(f"{name}@{np.round(x, 3).tolist()}")
    ok = contain_ok and worst_res <= 1e-5 and regular_ok
    record_acceptance(4, ok, f"clusters={clusters} containment={contain_ok} max_subalgebra_res={worst_res:.2e} "
                             f"regular_points={regular_pts} regular_ok={regular_ok}{' bad=' + ','.join(bad) if bad else ''}")
    assert ok


def test_05_groupoid_axioms():
    r = ga.groupoid_axiom_check(sl2_action(), 1000, seed=0, tol=1e-8)
    ok = r.failures == 0 and r.conclusive_rate >= 0.95
    record_acceptance(5, ok, f"samples={r.samples} checks={r.checks} failures={r.failures} "
                             f"conclusive_rate={r.conclusive_rate:.4f}")
    assert ok


def test_06_ad_equivariance():
    rng = np.random.default_rng(6)
    cfg = FiberConfig(rays=16)
    worst, draws = 0.0, 0
    for act in (sl2_action(), gl2_action()):
        points = [np.zeros(2), np.array([1.0, 0.0]), np.array([0.3, -0.7])]
        fibers = [ga.blowup_fiber_action(act, x, cfg) for x in points]
        for _ in range(25):
            i = int(rng.integers(len(points)))
            x, rep = points[i], fibers[i]
            c = rep.clusters[int(rng.integers(len(rep.clusters)))]
            g = act.exp(0.7 * rng.standard_normal(act.k))
            W = ga.adjoint_transport(act, g, c.subspace)
            gx = act.act(g, x)
            # the recomputed fiber must also see the transported approach direction
            extra = cfg if c.direction_tag is None else cfg.with_directions([act.act(g, c.direction_tag)], append=True)
            moved = ga.blowup_fiber_action(act, gx, extra)
            worst = max(worst, min(gr.distance(W, V) if W.dim == V.dim else np.inf for V in moved.subspaces))
            draws += 1
    ok = worst < 1e-3
    record_acceptance(6, ok, f"draws={draws} max_dist={worst:.2e}")
    assert ok


def test_07_periodic_bound():
    act = sl2_action()
    J_norm = np.sqrt(2.0)
    oracle = 2 * np.pi * J_norm
    r = ga.eta_estimate(act, ga.Annulus(0.5, 2.0))
    witness = min((w.norm for w in r.witnesses), default=np.inf)
    bound_ok = 0 < r.eta_hat <= oracle + r.grid_spacing
    close = abs(witness - oracle) <= 0.02 * oracle
    violations = [w for w in r.near_returns if w.norm < r.eta_hat and w.isotropy_distance >= 1e-4]
    ok = bound_ok and close and not violations
    record_acceptance(7, ok, f"eta_hat={r.eta_hat:.8f} oracle={oracle:.8f} spacing={r.grid_spacing:.4f} "
                             f"witnesses={len(r.witnesses)} near_returns={len(r.near_returns)} "
                             f"dichotomy_violations={len(violations)}")
    assert ok


def test_08_leaf_oracle():
    act = sl2_action()
    F = act.foliation()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(2)
        t = 0.5 * rng.standard_normal(3)
        V = ga.isotropy_subalgebra(act, x) if rng.random() < 0.5 else Subspace.zero(3)
        D = ho.leaf_distribution(F, x, t, V)
        oracle = ho.oracle_leaf_distribution(act, t, V)
        worst = max(worst, gr.distance(D, oracle) if D.dim == oracle.dim else np.inf)
    ok = worst < 1e-6
    record_acceptance(8, ok, f"draws=100 max_dist={worst:.2e}")
    assert ok


def test_09_fiber_dimension():
    checked, bad = 0, []
    for name, x, rep in all_fibers():
        F = cached_builtin(name).foliation
        for c in rep.clusters:
            p = BlowupPoint(x, c.subspace)
            a, b, d = ho.hblup_fiber_dim(F, p), F.k - c.subspace.dim, bl.algebroid_fiber(F, p).dim
            checked += 1
            if not a == b == d:
                bad.append(f"{name}@{np.round(x, 3).tolist()}:{a}/{b}/{d}")
    ok = not bad and checked > 0
    record_acceptance(9, ok, f"clusters={checked} mismatches={len(bad)}{' ' + ' '.join(bad[:5]) if bad else ''}")
    assert ok


def test_10_flow_correctness():
    rng = np.random.default_rng(10)
    worst_flow = 0.0
    for name in LINEAR:
        act = cached_builtin(name).action
        for _ in range(20):
            y, t = rng.standard_normal(act.n), rng.standard_normal(act.k)
            ref = act.act(act.exp(t), y)
            z = ho.flow(act.foliation(), y, t)
            worst_flow = max(worst_flow, np.linalg.norm(z - ref) / np.linalg.norm(ref))
    names = list(BUILTINS)
    worst_jac, steps, eps = 0.0, 256, 1e-5
    for i in range(200):
        F = cached_builtin(names[i % len(names)]).foliation
        y, t = rng.standard_normal(F.n), 0.5 * rng.standard_normal(F.k)
        Zt = ho.flow_jacobian_t(F, y, t, steps)
        fd = np.column_stack([
            (ho.flow(F, y, t + eps * e, steps) - ho.flow(F, y, t - eps * e, steps)) / (2 * eps) for e in np.eye(F.k)
        ])
        scale = max(np.linalg.norm(Zt), 1e-12)
        worst_jac = max(worst_jac, np.linalg.norm(Zt - fd) / scale if np.any(Zt) else np.linalg.norm(fd))
    ok = worst_flow <= 1e-9 and worst_jac <= 1e-6
    record_acceptance(10, ok, f"flow_rel={worst_flow:.2e} (100 draws) jac_rel={worst_jac:.2e} (200 draws)")
    assert ok


def test_11_functoriality():
    rng = np.random.default_rng(11)
    cfg = FiberConfig(rays=16)
    calls, bad, worst = 0, [], 0.0
    for name in BUILTINS:
        b = cached_builtin(name)
        pts = list(b.points)
        while len(pts) < 20:
            pts.append(rng.standard_normal(b.foliation.n))
        for x in pts[:20]:
            for m in (1, 2):
                r = bl.functoriality_check(b.foliation, x, m, cfg=cfg)
                calls += 1
                worst = max(worst, r.max_mismatch)
                if not r.ok:
                    bad.append(f"{name}@{np.round(x, 3).tolist()}/m={m}")
    ok = not bad
    record_acceptance(11, ok, f"checks={calls} failures={len(bad)} max_mismatch={worst:.2e}"
                              f"{' ' + ' '.join(bad[:5]) if bad else ''}")
    assert ok


def test_12_determinism(tmp_path):
    differing = []
    for name in BUILTINS:
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        codes = [cli.main(["run", "--builtin", name, "--out", str(d), "--seed", "12"]) for d in (a, b)]
        same = {p.name: p.read_bytes() for p in sorted(a.iterdir())} == {p.name: p.read_bytes() for p in sorted(b.iterdir())}
        if not same or codes[0] != codes[1]:
            differing.append(name)
    ok = not differing
    record_acceptance(12, ok, f"builtins={len(BUILTINS)} differing={differing}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
