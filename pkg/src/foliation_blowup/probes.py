"""
Probe operations for scenario files.

A probe is ``{"op": name, "params": {...}, "expect": {...}}``. Each operation
returns a JSON-ready result dict and optionally a CSV table ``(header, rows)``.
Expectations compare result keys: ``key`` for equality, ``key_min`` and
``key_max`` for bounds (applied elementwise to lists), with ``tol`` for floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import blowup, foliation, group_action, holonomy
from .blowup import BlowupPoint, FiberConfig
from .errors import INCONCLUSIVE, InvalidInput
from .foliation import FoliationModule
from .grassmann import Subspace
from .group_action import LieAlgebraAction


@dataclass
class Context:
    name: str
    F: FoliationModule
    action: Any = None
    seed: int = 0

    @property
    def lie(self) -> LieAlgebraAction:
        if not isinstance(self.action, LieAlgebraAction):
            raise InvalidInput("this probe needs a lie_action scenario")
        return self.action


@dataclass
class ProbeResult:
    result: dict
    csv: tuple[list[str], list[list]] | None = None
    failures: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# parameter helpers
# ---------------------------------------------------------------------------

def _vec(params: dict, key: str, dim: int, default=None) -> np.ndarray:
    if key not in params:
        if default is None:
            raise InvalidInput(f"missing parameter {key!r}")
        return np.asarray(default, dtype=float)
    v = np.asarray(params[key], dtype=float).reshape(-1)
    if v.size != dim:
        raise InvalidInput(f"parameter {key!r} must have {dim} entries")
    return v


def _subspace(ctx: Context, params: dict, x: np.ndarray | None, key: str = "V") -> Subspace:
    spec = params.get(key)
    k = ctx.F.k
    if spec is None:
        return Subspace.zero(k)
    if spec == "isotropy":
        if x is None:
            raise InvalidInput("V = 'isotropy' needs a base point")
        return foliation.isotropy(ctx.F, x)
    vecs = np.asarray(spec, dtype=float)
    if vecs.size == 0:
        return Subspace.zero(k)
    if vecs.ndim != 2 or vecs.shape[1] != k:
        raise InvalidInput(f"{key} must be a list of vectors in R^{k}")
    return Subspace.span(vecs, k)


def _fiber_cfg(ctx: Context, params: dict) -> FiberConfig:
    keys = ("rays", "decay", "steps", "r0", "tol", "regular_only", "conv_tol", "cluster_tol")
    kw = {k: params[k] for k in keys if k in params}
    kw.setdefault("seed", ctx.seed)
    try:
        return FiberConfig(**kw)
    except TypeError as exc:
        raise InvalidInput(str(exc)) from exc


def _group(ctx: Context, params: dict, key: str = "t", gkey: str = "g") -> np.ndarray:
    act = ctx.lie
    if gkey in params:
        g = np.asarray(params[gkey], dtype=float)
        if g.shape != (act.m, act.m):
            raise InvalidInput(f"{gkey} must be a {act.m}x{act.m} matrix")
        return g
    return act.exp(_vec(params, key, act.k, np.zeros(act.k)))


def _sub_json(V: Subspace) -> dict:
    return V.to_json()


def _tri(value) -> Any:
    return "inconclusive" if value is INCONCLUSIVE else bool(value)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def op_eval_matrix(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    return ProbeResult({"x": x, "value": foliation.eval_matrix(ctx.F, x)})


def op_isotropy(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    V = foliation.isotropy(ctx.F, x, p.get("tol", 1e-8))
    return ProbeResult({"x": x, "subspace": _sub_json(V), "dim": V.dim})


def op_tangent_fiber(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    V = foliation.tangent_fiber(ctx.F, x, p.get("tol", 1e-8))
    return ProbeResult({"x": x, "subspace": _sub_json(V), "dim": V.dim})


def op_regular_test(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    r = foliation.regular_test(ctx.F, x, p.get("radius", 0.1), p.get("samples", 8), p.get("tol", 1e-8), ctx.seed)
    return ProbeResult({"x": x, "is_regular": r.is_regular, "dim_F": r.dim_F, "dim_h": r.dim_h})


def op_structure_functions(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    sf = foliation.structure_functions_at(ctx.F, x, tol=p.get("tol", 1e-6), seed=ctx.seed,
                                          radius=p.get("radius", 0.05))
    return ProbeResult({"x": x, "f": sf.f, "residual": sf.residual, "degree": sf.degree})


def op_pullback(ctx, p):
    m = int(p.get("m", 1))
    G = foliation.pullback_foliation(ctx.F, m)
    x = _vec(p, "x", ctx.F.n, np.zeros(ctx.F.n))
    xt = np.concatenate([x, np.zeros(m)])
    V, W = foliation.isotropy(ctx.F, x), foliation.isotropy(G, xt)
    return ProbeResult({"n": G.n, "k": G.k, "isotropy_dim": W.dim, "base_isotropy_dim": V.dim})


def op_blowup_fiber(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    rep = blowup.blowup_fiber(ctx.F, x, _fiber_cfg(ctx, p))
    res = rep.to_json()
    res["cluster_dims"] = sorted(rep.dims)
    res["cluster_count"] = len(rep.clusters)
    # the limit basis is flattened into the trailing columns
    header = [f"v{i}" for i in range(ctx.F.n)] + ["label", "dim", "basis"]
    return ProbeResult(res, (header, rep.csv_rows()))


def op_verify_fiber_properties(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    rep = blowup.blowup_fiber(ctx.F, x, _fiber_cfg(ctx, p))
    pr = blowup.verify_fiber_properties(ctx.F, x, rep, p.get("tol", 1e-6))
    return ProbeResult({"x": x, "containment_ok": pr.containment_ok, "subalgebra_residual": pr.subalgebra_residual,
                        "cluster_count": len(rep.clusters)})


def op_algebroid_fiber(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    V = _subspace(ctx, p, x)
    A = blowup.algebroid_fiber(ctx.F, BlowupPoint(x, V))
    return ProbeResult({"x": x, "subspace": _sub_json(A), "dim": A.dim})


def op_characteristic_set(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    rep = blowup.blowup_fiber(ctx.F, x, _fiber_cfg(ctx, p))
    cs = blowup.characteristic_set(ctx.F, x, rep)
    return ProbeResult({"x": x, "covectors": [_sub_json(c) for c in cs], "dims": sorted(c.dim for c in cs)})


def op_functoriality_check(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    r = blowup.functoriality_check(ctx.F, x, int(p.get("m", 1)), p.get("tol", 1e-6), _fiber_cfg(ctx, p))
    return ProbeResult({"x": x, "ok": r.ok, "max_mismatch": r.max_mismatch,
                        "base_clusters": len(r.base_clusters), "pullback_clusters": len(r.pullback_clusters)})


def op_isotropy_subalgebra(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    V = group_action.isotropy_subalgebra(ctx.action, x) if ctx.action is not None else foliation.isotropy(ctx.F, x)
    return ProbeResult({"x": x, "subspace": _sub_json(V), "dim": V.dim})


def op_adjoint_transport(ctx, p):
    g = _group(ctx, p)
    V = _subspace(ctx, p, None)
    W = group_action.adjoint_transport(ctx.lie, g, V)
    return ProbeResult({"g": g, "subspace": _sub_json(W), "dim": W.dim})


def op_groupoid_axioms(ctx, p):
    r = group_action.groupoid_axiom_check(ctx.lie, int(p.get("samples", 100)), ctx.seed, p.get("tol", 1e-8))
    return ProbeResult(r.to_json())


def op_coset_equal(ctx, p):
    act = ctx.lie
    x = _vec(p, "x", act.n)
    V = _subspace(ctx, p, x)
    a = group_action.GroupoidElement(act, _group(ctx, p, "t1", "g1"), V, x)
    b = group_action.GroupoidElement(act, _group(ctx, p, "t2", "g2"), V, x)
    return ProbeResult({"value": _tri(group_action.coset_equal(a, b, p.get("tol", 1e-8)))})


def op_local_log_membership(ctx, p):
    act = ctx.lie
    V = _subspace(ctx, p, None)
    res = group_action.local_log_membership(act, _group(ctx, p, "t", "h"), V, p.get("eta", 1.0), p.get("tol", 1e-8))
    return ProbeResult({"value": _tri(res)})


def op_hblup_metric(ctx, p):
    act = ctx.lie
    x1 = _vec(p, "x1", act.n)
    x2 = _vec(p, "x2", act.n)
    a = group_action.GroupoidElement(act, _group(ctx, p, "t1", "g1"), _subspace(ctx, p, x1, "V1"), x1)
    b = group_action.GroupoidElement(act, _group(ctx, p, "t2", "g2"), _subspace(ctx, p, x2, "V2"), x2)
    return ProbeResult({"value": group_action.hblup_metric(a, b, int(p.get("sample_count", 64)), ctx.seed)})


def _region(p: dict, n: int):
    if "annulus" in p:
        r_in, r_out = p["annulus"]
        return group_action.Annulus(float(r_in), float(r_out))
    if "box" in p:
        lo, hi = p["box"]
        if len(lo) != n or len(hi) != n:
            raise InvalidInput(f"box corners must lie in R^{n}")
        return group_action.Box(tuple(map(float, lo)), tuple(map(float, hi)))
    raise InvalidInput("give either 'annulus' or 'box'")


def _period_probe(search: holonomy.PeriodSearch, n: int, k: int) -> ProbeResult:
    res = search.to_json()
    res["witness_count"] = len(search.witnesses)
    res["witnesses"] = res["witnesses"][:20]
    header = [f"y{i}" for i in range(n)] + [f"Y{i}" for i in range(k)] + ["norm", "residual"]
    return ProbeResult(res, (header, search.csv_rows()))


def op_eta_estimate(ctx, p):
    act = ctx.action
    if act is None:
        raise InvalidInput("eta_estimate needs an action scenario")
    cfg = group_action.EtaConfig(
        grid=int(p.get("grid", 8)), directions=int(p.get("directions", 300)), T_max=float(p.get("T_max", 10.0)),
        scale_steps=int(p.get("scale_steps", 400)), return_tol=float(p.get("return_tol", 1e-6)),
        refine=int(p.get("refine", 3)), seed=ctx.seed,
    )
    return _period_probe(group_action.eta_estimate(act, _region(p, ctx.F.n), cfg), ctx.F.n, ctx.F.k)


def op_period_bound_foliation(ctx, p):
    search = holonomy.period_bound_foliation(
        ctx.F, _region(p, ctx.F.n), grid=int(p.get("grid", 8)), directions=int(p.get("directions", 64)),
        T_max=float(p.get("T_max", 10.0)), scale_steps=int(p.get("scale_steps", 400)),
        return_tol=float(p.get("return_tol", 1e-6)), refine=int(p.get("refine", 0)), seed=ctx.seed,
    )
    return _period_probe(search, ctx.F.n, ctx.F.k)


def op_embedding_check(ctx, p):
    act = ctx.lie
    x = _vec(p, "x", act.n)
    V = _subspace(ctx, p, x)
    r = group_action.embedding_check(act, BlowupPoint(x, V), p.get("radius", 0.1), int(p.get("grid", 5)))
    return ProbeResult({"ok": r.ok, "pairs": r.pairs, "collisions": r.collisions, "inconclusive": r.inconclusive})


def op_closed_subgroup_check(ctx, p):
    act = ctx.lie
    V = _subspace(ctx, p, None)
    r = group_action.closed_subgroup_check(act, V, int(p.get("words", 2000)), int(p.get("max_length", 4)),
                                           float(p.get("scale", 100.0)), seed=ctx.seed)
    return ProbeResult({"ok": r.ok, "words": r.words, "in_chart": r.in_chart, "violations": r.violations})


def op_flow(ctx, p):
    y = _vec(p, "y", ctx.F.n)
    t = _vec(p, "t", ctx.F.k)
    return ProbeResult({"y": y, "t": t, "value": holonomy.flow(ctx.F, y, t)})


def op_flow_jacobian_t(ctx, p):
    y = _vec(p, "y", ctx.F.n)
    t = _vec(p, "t", ctx.F.k)
    return ProbeResult({"y": y, "t": t, "value": holonomy.flow_jacobian_t(ctx.F, y, t)})


def op_leaf_distribution(ctx, p):
    y = _vec(p, "y", ctx.F.n)
    t = _vec(p, "t", ctx.F.k, np.zeros(ctx.F.k))
    D = holonomy.leaf_distribution(ctx.F, y, t, _subspace(ctx, p, y), holonomy.LeafConfig(seed=ctx.seed))
    return ProbeResult({"y": y, "t": t, "subspace": _sub_json(D), "dim": D.dim})


def op_leaf_trace(ctx, p):
    y = _vec(p, "y", ctx.F.n)
    t = _vec(p, "t", ctx.F.k, np.zeros(ctx.F.k))
    tr = holonomy.leaf_trace(ctx.F, y, t, _subspace(ctx, p, y), int(p.get("steps", 20)),
                             float(p.get("step_size", 1e-2)), cfg=holonomy.LeafConfig(seed=ctx.seed))
    header = [f"t{i}" for i in range(ctx.F.k)] + ["r_residual"]
    return ProbeResult({"y": y, "points": tr.points, "r_residual": tr.r_residual,
                        "max_r_residual": float(np.max(tr.r_residual)), "distribution_dim": tr.distribution_dim},
                       (header, tr.csv_rows()))


def op_hblup_fiber_dim(ctx, p):
    x = _vec(p, "x", ctx.F.n)
    pt = BlowupPoint(x, _subspace(ctx, p, x))
    return ProbeResult({"x": x, "value": holonomy.hblup_fiber_dim(ctx.F, pt, holonomy.LeafConfig(seed=ctx.seed)),
                        "algebroid_dim": blowup.algebroid_fiber(ctx.F, pt).dim})


OPS: dict[str, Callable[[Context, dict], ProbeResult]] = {
    name[3:]: fn for name, fn in globals().items() if name.startswith("op_")
}


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def _flat(v) -> list:
    if isinstance(v, (list, tuple, np.ndarray)):
        return [e for item in v for e in _flat(item)]
    return [v]


def _equal(a, b, tol: float) -> bool:
    if isinstance(b, (list, tuple)) or isinstance(a, (list, tuple, np.ndarray)):
        fa, fb = _flat(a), _flat(b)
        return len(fa) == len(fb) and all(_equal(x, y, tol) for x, y in zip(fa, fb))
    if isinstance(b, bool) or isinstance(a, (bool, str)) or isinstance(b, str):
        return a == b
    return abs(float(a) - float(b)) <= tol * max(1.0, abs(float(b)))


def check_expect(result: dict, expect: dict) -> list[str]:
    """Failure messages for the expectations that do not hold."""
    tol = float(expect.get("tol", 1e-6))
    failures = []
    for key, want in expect.items():
        if key == "tol":
            continue
        if key in result:
            if not _equal(result[key], want, tol):
                failures.append(f"{key}: expected {want!r}, got {result[key]!r}")
            continue
        base, _, bound = key.rpartition("_")
        if bound not in ("min", "max") or base not in result:
            raise InvalidInput(f"expectation {key!r} names no result field")
        vals = [float(v) for v in _flat(result[base])]
        bad = [v for v in vals if (v < want - tol if bound == "min" else v > want + tol)]
        if bad:
            failures.append(f"{key}: bound {want!r} violated by {bad[:3]!r}")
    return failures


def run_probe(ctx: Context, probe: dict) -> ProbeResult:
    op = probe["op"]
    if op not in OPS:
        raise InvalidInput(f"unknown operation {op!r}")
    params = probe.get("params", {}) or {}
    res = OPS[op](ctx, params)
    res.failures = check_expect(res.result, probe.get("expect", {}) or {})
    return res
