import numpy as np
import pytest

from foliation_blowup import blowup as bl
from foliation_blowup import foliation as fo
from foliation_blowup import grassmann as gr
from foliation_blowup.blowup import BlowupPoint, FiberConfig
from foliation_blowup.errors import InvalidInput, NoRegularApproach
from foliation_blowup.foliation import FoliationModule, PolyVectorField
from foliation_blowup.grassmann import Subspace
from foliation_blowup.scenarios import builtin, regular_module, vanish_origin_module


@pytest.fixture(scope="module")
def sl2F():
    return builtin("sl2").foliation


@pytest.fixture(scope="module")
def bumpF():
    return builtin("bump").foliation


@pytest.mark.parametrize("x, dims", [(0.0, [0]), (0.5, [0]), (1.0, [0, 1]), (-1.0, [0, 1]),
                                     (1.5, [1]), (-1.5, [1])])
def test_bump_fiber_table(bumpF, x, dims):
    rep = bl.blowup_fiber(bumpF, [x])
    assert sorted(rep.dims) == dims
    assert rep.non_convergent_rays == 0


def test_sl2_origin_limits_are_direction_isotropies(sl2F):
    cfg = FiberConfig(rays=16)
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], cfg)
    for ray in rep.rays:
        h_v = fo.isotropy(sl2F, ray.direction)
        assert ray.limit.dim == 1
        assert gr.distance(ray.limit, h_v) < 1e-6
    # opposite directions share their limit
    assert len(rep.clusters) == 8


def test_regular_point_single_zero_cluster():
    rep = bl.blowup_fiber(regular_module(), [0.3, 4.0])
    assert rep.dims == [0]


def test_no_regular_approach():
    # y d/dx vanishes on the x-axis; rays along that axis never see a regular point
    F = FoliationModule(2, (PolyVectorField([{(0, 1): 1.0}, {}]),))
    cfg = FiberConfig().with_directions([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(NoRegularApproach):
        bl.blowup_fiber(F, [0.0, 0.0], cfg)
    # the closure variant admits the singular samples
    rep = bl.blowup_fiber(F, [0.0, 0.0], FiberConfig(regular_only=False).with_directions([[1.0, 0.0]]))
    assert rep.dims == [1]


def test_config_validation():
    with pytest.raises(InvalidInput):
        FiberConfig(rays=4)
    with pytest.raises(InvalidInput):
        FiberConfig(steps=5)
    with pytest.raises(InvalidInput):
        FiberConfig(decay=1.5)


def test_verify_fiber_properties_examples(sl2F):
    F = vanish_origin_module()
    rep = bl.blowup_fiber(F, [0.0, 0.0], FiberConfig(rays=16))
    props = bl.verify_fiber_properties(F, [0.0, 0.0], rep)
    assert props.containment_ok and props.subalgebra_residual <= 1e-6
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=16))
    props = bl.verify_fiber_properties(sl2F, [0.0, 0.0], rep)
    assert props.containment_ok and props.subalgebra_residual <= 1e-6
    rep = bl.blowup_fiber(regular_module(), [0.0, 0.0])
    assert bl.verify_fiber_properties(regular_module(), [0.0, 0.0], rep).subalgebra_residual == 0


def test_algebroid_fiber_examples(sl2F):
    assert bl.algebroid_fiber(sl2F, BlowupPoint(np.zeros(2), Subspace.zero(3))).dim == 3
    x = np.array([1.0, 0.0])
    h = fo.isotropy(sl2F, x)
    assert bl.algebroid_fiber(sl2F, BlowupPoint(x, h)).dim == fo.tangent_fiber(sl2F, x).dim
    assert bl.algebroid_fiber(sl2F, BlowupPoint(np.zeros(2), h)).dim == 2


def test_characteristic_set_examples(sl2F, bumpF):
    rep = bl.blowup_fiber(regular_module(), [0.0, 0.0])
    assert [c.dim for c in bl.characteristic_set(regular_module(), [0.0, 0.0], rep)] == [1]
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=16))
    assert {c.dim for c in bl.characteristic_set(sl2F, [0.0, 0.0], rep)} == {2}
    rep = bl.blowup_fiber(bumpF, [1.0])
    assert sorted(c.dim for c in bl.characteristic_set(bumpF, [1.0], rep)) == [0, 1]


def test_characteristic_closure_along_rays(sl2F):
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=8))
    for d in bl.characteristic_ray_distances(sl2F, [0.0, 0.0], rep):
        # linear module: kernels are constant along rays, distances stay at zero
        assert np.all(np.diff(d) <= 0.1 * d[:-1] + 1e-12)
    F = vanish_origin_module()
    rep = bl.blowup_fiber(F, [0.0, 0.0], FiberConfig(rays=8))
    for d in bl.characteristic_ray_distances(F, [0.0, 0.0], rep):
        assert np.all(np.diff(d) <= 0.1 * d[:-1] + 1e-12)


@pytest.mark.parametrize("factor", [0.1, 1.0, 10.0])
def test_scale_consistency_linear(sl2F, factor):
    dirs = bl.ray_directions(2, 12, np.random.default_rng(1))
    ref = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig().with_directions(dirs))
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(r0=0.5 * factor).with_directions(dirs))
    assert gr.hausdorff(ref.subspaces, rep.subspaces) < 1e-6


def test_property_containment_every_cluster():
    for name in ("sl2", "vanish_origin", "gl2"):
        F = builtin(name).foliation
        rep = bl.blowup_fiber(F, np.zeros(F.n), FiberConfig(rays=16))
        h = fo.isotropy(F, np.zeros(F.n))
        assert all(gr.contains(h, V, 1e-6) for V in rep.subspaces)


@pytest.mark.parametrize("name, x", [("regular", [0.0, 1.0]), ("sl2", [0.0, 0.0]), ("bump", [1.0])])
def test_functoriality_examples(name, x):
    F = builtin(name).foliation
    res = bl.functoriality_check(F, x, 1, cfg=FiberConfig(rays=16))
    assert res.ok, res


def test_report_serialization(sl2F):
    rep = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=8))
    data = rep.to_json()
    assert len(data["clusters"]) == len(rep.clusters)
    assert len(rep.csv_rows()) == rep.rays_sampled
    assert rep.clusters[0].direction_tag is not None


def test_fiber_is_seed_deterministic(sl2F):
    a = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=8, seed=3))
    b = bl.blowup_fiber(sl2F, [0.0, 0.0], FiberConfig(rays=8, seed=3))
    assert a.to_json() == b.to_json()
