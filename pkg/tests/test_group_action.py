import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from foliation_blowup import group_action as ga
from foliation_blowup import grassmann as gr
from foliation_blowup.blowup import BlowupPoint, FiberConfig
from foliation_blowup.errors import INCONCLUSIVE, InvalidInput, NotComposable, NotInAlgebra
from foliation_blowup.grassmann import Subspace
from foliation_blowup.group_action import GroupoidElement, LieAlgebraAction
from foliation_blowup.scenarios import SL2_J, bump_action, so2_action, torus_action

from conftest import SL2_E, SL2_F, SL2_H

E_ = Subspace.span([0, 1, 0])
F_ = Subspace.span([0, 0, 1])
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_structure_constants(sl2):
    c = sl2.structure_constants
    assert c[1, 2] == pytest.approx([1, 0, 0])  # [E, F] = H
    assert c[0, 1] == pytest.approx([0, 2, 0])  # [H, E] = 2E
    assert c[0, 2] == pytest.approx([0, 0, -2])


def test_action_validation():
    with pytest.raises(InvalidInput):
        LieAlgebraAction([SL2_E, SL2_F])  # [E, F] = H missing
    with pytest.raises(InvalidInput):
        LieAlgebraAction([SL2_E, 2 * SL2_E])
    with pytest.raises(InvalidInput):
        LieAlgebraAction(np.zeros((2, 2, 3)))


def test_action_json_roundtrip(sl2):
    act = LieAlgebraAction.from_json(sl2.to_json())
    assert np.allclose(act.structure_constants, sl2.structure_constants)
    aff = LieAlgebraAction([[[0.0]]], affine=[[1.0]])
    again = LieAlgebraAction.from_json(aff.to_json())
    assert again.act(again.exp([2.0]), np.array([1.0])) == pytest.approx([3.0])


def test_isotropy_examples(sl2):
    assert gr.distance(ga.isotropy_subalgebra(sl2, [1.0, 0.0]), E_) < 1e-12
    assert ga.isotropy_subalgebra(sl2, [0.0, 0.0]).dim == 3
    assert ga.isotropy_subalgebra(so2_action(), [1.0, 0.0]).dim == 0


def test_blowup_fiber_action_examples(sl2):
    rep = ga.blowup_fiber_action(sl2, [1.0, 0.0], FiberConfig(rays=8))
    assert len(rep.clusters) == 1 and gr.distance(rep.clusters[0].subspace, E_) < 1e-8
    rep = ga.blowup_fiber_action(bump_action(), [0.2], FiberConfig(rays=8))
    assert rep.dims == [0]
    rep = ga.blowup_fiber_action(sl2, [0.0, 0.0], FiberConfig(rays=8))
    for c in rep.clusters:
        assert gr.distance(c.subspace, ga.isotropy_subalgebra(sl2, c.direction_tag)) < 1e-6


def test_adjoint_transport_examples(sl2):
    V = Subspace.span([[1, 2, 0], [0, 1, -1]])
    assert gr.distance(ga.adjoint_transport(sl2, np.eye(2), V), V) < 1e-12
    assert gr.distance(ga.adjoint_transport(sl2, sl2.exp([1.0, 0, 0]), E_), E_) < 1e-12
    assert gr.distance(ga.adjoint_transport(sl2, ROT, E_), F_) < 1e-12
    # the image is the isotropy at the moved point
    assert gr.distance(F_, ga.isotropy_subalgebra(sl2, ROT @ [1.0, 0.0])) < 1e-12


def test_adjoint_transport_outside_group():
    with pytest.raises(NotInAlgebra):
        ga.adjoint_transport(so2_action(), np.diag([2.0, 1.0]), Subspace.full(1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_adjoint_is_an_action(seed):
    rng = np.random.default_rng(seed)
    act = ga.LieAlgebraAction([SL2_H, SL2_E, SL2_F])
    g, h = act.exp(rng.standard_normal(3)), act.exp(rng.standard_normal(3))
    V = gr.orthonormalize(rng.standard_normal((3, 1 + seed % 2)))
    lhs = ga.adjoint_transport(act, g @ h, V)
    rhs = ga.adjoint_transport(act, g, ga.adjoint_transport(act, h, V))
    assert gr.distance(lhs, rhs) < 1e-9


def test_left_trivialized_dexp(sl2):
    rng = np.random.default_rng(4)
    t, s = rng.standard_normal(3), rng.standard_normal(3)
    eps = 1e-6
    d = (sl2.exp(t + eps * s) - sl2.exp(t - eps * s)) / (2 * eps)
    lhs = np.linalg.solve(sl2.exp(t), d)
    c, _ = sl2.coords(lhs)
    assert ga.left_trivialized_dexp(sl2, t) @ s == pytest.approx(c, abs=1e-7)


def test_source_target_examples(sl2):
    x = np.array([1.0, 0.0])
    u = ga.unit(sl2, E_, x)
    assert ga._same_point(ga.source(u), ga.target(u), 1e-12)
    gam = GroupoidElement(sl2, sl2.exp([1.0, 0, 0]), E_, np.zeros(2))
    t = ga.target(gam)
    assert np.allclose(t.base, 0) and gr.distance(t.subspace, E_) < 1e-12
    rot = GroupoidElement(sl2, ROT, E_, x)
    assert ga.target(rot).base == pytest.approx([0.0, 1.0])


def test_compose_and_inverse(sl2):
    x = np.array([1.0, 0.0])
    gam = GroupoidElement(sl2, sl2.exp([0.2, -0.1, 0.3]), E_, x)
    assert ga.coset_equal(ga.compose(gam, ga.unit(sl2, E_, x)), gam) is True
    inv = ga.inverse(gam)
    t = ga.target(gam)
    assert ga.coset_equal(ga.compose(gam, inv), ga.unit(sl2, t.subspace, t.base)) is True
    assert ga.coset_equal(ga.inverse(inv), gam) is True
    assert ga.coset_equal(ga.inverse(ga.unit(sl2, E_, x)), ga.unit(sl2, E_, x)) is True
    with pytest.raises(NotComposable):
        ga.compose(gam, gam)


def test_compose_source_target(sl2):
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = ga.random_blowup_point(sl2, rng)
        g2 = ga.random_arrow(sl2, p, rng)
        g1 = ga.random_arrow(sl2, ga.target(g2), rng)
        c = ga.compose(g1, g2)
        assert ga._same_point(ga.source(c), ga.source(g2), 1e-9)
        assert ga._same_point(ga.target(c), ga.target(g1), 1e-8)


def test_local_log_membership_examples(sl2):
    assert ga.local_log_membership(sl2, np.eye(2), E_, 1.0) is True
    assert ga.local_log_membership(sl2, scipy.linalg.expm(0.01 * SL2_E), E_, 1.0) is True
    assert ga.local_log_membership(sl2, scipy.linalg.expm(0.01 * SL2_H), E_, 1.0) is False
    assert ga.local_log_membership(sl2, scipy.linalg.expm(3.0 * SL2_H), E_, 1.0) is INCONCLUSIVE


def test_inconclusive_is_not_a_boolean():
    with pytest.raises(TypeError):
        bool(INCONCLUSIVE)


def test_coset_equal_examples(sl2):
    x = np.zeros(2)
    g = sl2.exp([0.3, 0.2, -0.4])
    a = GroupoidElement(sl2, g, E_, x)
    assert ga.coset_equal(a, GroupoidElement(sl2, g @ sl2.exp([0, 0.05, 0]), E_, x)) is True
    assert ga.coset_equal(a, GroupoidElement(sl2, g @ sl2.exp([0.01, 0, 0]), E_, x)) is False
    # far along the subgroup: the descent peels off the V part
    assert ga.coset_equal(a, GroupoidElement(sl2, g @ sl2.exp([0, 7.0, 0]), E_, x)) is True
    so2 = so2_action()
    full = Subspace.full(1)
    res = ga.coset_equal(GroupoidElement(so2, np.eye(2), full, x), GroupoidElement(so2, so2.exp([3.0]), full, x))
    assert res is True or res is INCONCLUSIVE


def test_hblup_metric_examples(sl2):
    x = np.zeros(2)
    a = GroupoidElement(sl2, sl2.exp([0.3, 0.1, 0.0]), E_, x)
    assert ga.hblup_metric(a, a) <= 1e-12
    b = GroupoidElement(sl2, a.g @ sl2.exp([0, 0.5, 0]), E_, x)
    d_small, d_big = ga.hblup_metric(a, b, 8), ga.hblup_metric(a, b, 256)
    assert d_big <= d_small and d_big < 0.05
    y = np.array([1.0, 0.0])
    c = GroupoidElement(sl2, np.eye(2), E_, y)
    assert ga.hblup_metric(ga.unit(sl2, E_, x), c) >= 1.0


def test_groupoid_axioms_small(sl2):
    r = ga.groupoid_axiom_check(sl2, 40, seed=5)
    assert r.failures == 0 and r.conclusive_rate >= 0.95


def test_axiom_check_detects_broken_composition(sl2, monkeypatch):
    real = ga.compose

    def skewed(g1, g2, tol=1e-8):
        out = real(g1, g2, tol)
        return GroupoidElement(out.action, out.g @ sl2.exp([0.05, 0, 0]), out.V, out.x)

    monkeypatch.setattr(ga, "compose", skewed)
    assert ga.groupoid_axiom_check(sl2, 10, seed=1).failures > 0


def test_eta_translation_has_no_witness():
    act = LieAlgebraAction([[[0.0]]], affine=[[1.0]])
    r = ga.eta_estimate(act, ga.Box((-1.0,), (1.0,)), ga.EtaConfig(grid=5, T_max=5.0))
    assert r.witnesses == [] and r.eta_hat == 5.0


def test_eta_bump_outside_support():
    r = ga.eta_estimate(bump_action(), ga.Box((-2.0,), (-1.5,)), ga.EtaConfig(grid=4, T_max=4.0, scale_steps=50))
    assert r.witnesses == [] and r.eta_hat == 4.0


def test_eta_so2_rotation_period():
    r = ga.eta_estimate(so2_action(), ga.Annulus(0.5, 1.0), ga.EtaConfig(grid=6))
    assert r.eta_hat == pytest.approx(2 * np.pi, rel=1e-6)


def test_sl2_rotation_oracle(sl2):
    # J = E - F generates rotations; exp(2 pi J) = I
    assert sl2.exp(2 * np.pi * SL2_J) == pytest.approx(np.eye(2), abs=1e-12)


def test_embedding_check_examples(sl2):
    assert ga.embedding_check(sl2, BlowupPoint(np.zeros(2), Subspace.zero(3)), grid=3).ok
    res = ga.embedding_check(sl2, BlowupPoint(np.zeros(2), E_), radius=0.1, grid=5)
    assert res.ok and res.pairs > 0
    big = ga.embedding_check(so2_action(), BlowupPoint(np.zeros(2), Subspace.zero(1)), radius=np.pi, grid=3)
    assert not big.ok and big.collisions >= 1


def test_closed_subgroup_examples(sl2):
    assert ga.closed_subgroup_check(sl2, E_).ok
    assert ga.closed_subgroup_check(sl2, Subspace.full(3)).ok
    torus = torus_action()
    assert ga.closed_subgroup_check(torus, Subspace.span([1, 1])).ok
    bad = ga.closed_subgroup_check(torus, Subspace.span([1, 2**0.5]))
    assert not bad.ok and bad.violations > 0
