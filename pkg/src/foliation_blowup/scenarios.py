"""
Built-in example foliations and actions.

Each builtin bundles the geometric object with the probe points used by the
default scenario runs and a default probe list for the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidInput
from .foliation import FoliationModule, FunctionVectorField, PolyVectorField, pullback_foliation
from .group_action import FlowAction, LieAlgebraAction

# sl2 basis in the order H, E, F; the rotation generator is J = E - F
SL2_H = np.diag([1.0, -1.0])
SL2_E = np.array([[0.0, 1.0], [0.0, 0.0]])
SL2_F = np.array([[0.0, 0.0], [1.0, 0.0]])
SL2_J = np.array([0.0, 1.0, -1.0])


@dataclass
class Builtin:
    name: str
    description: str
    foliation: FoliationModule
    action: LieAlgebraAction | FlowAction | None = None
    points: list[NDArray] = field(default_factory=list)
    probes: list[dict] = field(default_factory=list)

    @property
    def kind(self) -> str:
        if isinstance(self.action, LieAlgebraAction):
            return "lie_action"
        return "poly_foliation" if self.foliation.is_polynomial else "builtin"

    @property
    def linear(self) -> bool:
        return isinstance(self.action, LieAlgebraAction)


# ---------------------------------------------------------------------------
# the bump field rho(x) d/dx, rho = exp(-1/(1-x^2)) on (-1, 1)
# ---------------------------------------------------------------------------

def _bump_log(x: NDArray) -> tuple[NDArray, NDArray]:
    inside = np.abs(x) < 1
    logs = np.full(x.shape, -np.inf)
    logs[inside] = -1.0 / (1.0 - x[inside] ** 2)
    return logs, inside


def bump_values(pts: NDArray) -> NDArray:
    logs, _ = _bump_log(pts[:, 0])
    return np.exp(logs)[:, None]


def bump_jacobian(pts: NDArray) -> NDArray:
    x = pts[:, 0]
    logs, inside = _bump_log(x)
    d = np.zeros_like(x)
    d[inside] = np.exp(logs[inside]) * (-2 * x[inside] / (1 - x[inside] ** 2) ** 2)
    return d[:, None, None]


def bump_scaled(pts: NDArray) -> tuple[NDArray, NDArray]:
    logs, inside = _bump_log(pts[:, 0])
    vals = inside.astype(float)[:, None]
    return vals, np.where(inside, logs, 0.0)


def bump_field() -> FunctionVectorField:
    return FunctionVectorField(1, bump_values, bump_jacobian, bump_scaled, name="rho d/dx")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def sl2_action() -> LieAlgebraAction:
    return LieAlgebraAction([SL2_H, SL2_E, SL2_F], name="sl2")


def sln_action(n: int = 3) -> LieAlgebraAction:
    if n < 2:
        raise InvalidInput("sl_n needs n >= 2")
    basis = []
    for i in range(n - 1):
        h = np.zeros((n, n))
        h[i, i], h[i + 1, i + 1] = 1.0, -1.0
        basis.append(h)
    for i in range(n):
        for j in range(n):
            if i != j:
                e = np.zeros((n, n))
                e[i, j] = 1.0
                basis.append(e)
    return LieAlgebraAction(basis, name=f"sl{n}")


def gl2_action() -> LieAlgebraAction:
    basis = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1.0
            basis.append(e)
    return LieAlgebraAction(basis, name="gl2")


def so2_action() -> LieAlgebraAction:
    return LieAlgebraAction([np.array([[0.0, -1.0], [1.0, 0.0]])], name="so2")


def torus_action() -> LieAlgebraAction:
    """Two commuting rotations of R^4 = R^2 x R^2."""
    r1, r2 = np.zeros((4, 4)), np.zeros((4, 4))
    r1[0, 1], r1[1, 0] = -1.0, 1.0
    r2[2, 3], r2[3, 2] = -1.0, 1.0
    return LieAlgebraAction([r1, r2], name="torus")


def vanish_origin_module() -> FoliationModule:
    """Fields vanishing at the origin of R^2: x d/dx, y d/dx, x d/dy, y d/dy.

    Generator i*2 + j is the elementary matrix E_ij acting linearly, so a
    coefficient vector c corresponds to L = [[c1, c2], [c3, c4]].
    """
    gens = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1.0
            gens.append(PolyVectorField.linear(e))
    return FoliationModule(2, tuple(gens), coeff_degree=1, name="vanish_origin")


def regular_module() -> FoliationModule:
    return FoliationModule(2, (PolyVectorField.constant([1.0, 0.0]),), coeff_degree=1, name="regular")


def bump_action() -> FlowAction:
    return FlowAction([bump_field()], name="bump")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def _fiber(x, expect=None) -> dict:
    p = {"op": "blowup_fiber", "params": {"x": list(x)}}
    if expect:
        p["expect"] = expect
    return p


def _sl2() -> Builtin:
    act = sl2_action()
    probes = [
        _fiber([0, 0], {"cluster_dims_max": 1, "cluster_dims_min": 1}),
        {"op": "verify_fiber_properties", "params": {"x": [0, 0]}, "expect": {"containment_ok": True}},
        {"op": "isotropy_subalgebra", "params": {"x": [1, 0]}, "expect": {"dim": 1}},
        {"op": "groupoid_axioms", "params": {"samples": 50}, "expect": {"failures": 0}},
        {"op": "eta_estimate", "params": {"annulus": [0.5, 2.0]}, "expect": {"eta_hat_max": 8.9}},
        {"op": "closed_subgroup_check", "params": {"V": [[0, 1, 0]]}, "expect": {"ok": True}},
        {"op": "hblup_fiber_dim", "params": {"x": [0, 0], "V": [[0, 1, 0]]}, "expect": {"value": 2}},
        {"op": "leaf_distribution", "params": {"y": [1, 0], "t": [0.1, 0.2, -0.1], "V": [[0, 1, 0]]}},
    ]
    return Builtin("sl2", "SL2 acting linearly on R^2 (basis H, E, F)", act.foliation(), act,
                   [np.zeros(2), np.array([1.0, 0.0]), np.array([0.3, -0.7])], probes)


def _sln(n: int = 3) -> Builtin:
    act = sln_action(n)
    e1 = np.eye(n)[0]
    probes = [_fiber([0] * n), {"op": "isotropy_subalgebra", "params": {"x": e1.tolist()}}]
    return Builtin(f"sl{n}" if n != 3 else "sln", f"SL{n} acting linearly on R^{n}", act.foliation(), act,
                   [np.zeros(n), e1], probes)


def _bump() -> Builtin:
    act = bump_action()
    probes = [
        _fiber([0.0], {"cluster_dims": [0]}),
        _fiber([1.0], {"cluster_dims": [0, 1]}),
        _fiber([-1.0], {"cluster_dims": [0, 1]}),
        _fiber([1.5], {"cluster_dims": [1]}),
        _fiber([-1.5], {"cluster_dims": [1]}),
        {"op": "period_bound_foliation", "params": {"box": [[-0.5], [0.5]], "T_max": 5.0}, "expect": {"witness_count": 0}},
        {"op": "flow", "params": {"y": [2.0], "t": [3.0]}, "expect": {"value": [2.0]}},
    ]
    pts = [np.array([v]) for v in (0.0, 1.0, -1.0, 1.5, -1.5, 0.4)]
    return Builtin("bump", "flow of rho(x) d/dx on R, rho = exp(-1/(1-x^2)) on (-1,1), 0 outside",
                   act.foliation(), act, pts, probes)


def _vanish_origin() -> Builtin:
    F = vanish_origin_module()
    probes = [_fiber([0, 0], {"cluster_dims_min": 2, "cluster_dims_max": 2}),
              {"op": "verify_fiber_properties", "params": {"x": [0, 0]}, "expect": {"containment_ok": True}}]
    return Builtin("vanish_origin", "vector fields on R^2 vanishing at the origin", F, None,
                   [np.zeros(2), np.array([1.0, 0.5])], probes)


def _regular() -> Builtin:
    F = regular_module()
    probes = [_fiber([0, 0], {"cluster_dims": [0]}), {"op": "regular_test", "params": {"x": [0, 0]},
                                                      "expect": {"is_regular": True}}]
    return Builtin("regular", "the constant field d/dx on R^2", F, None, [np.zeros(2), np.array([1.0, 2.0])], probes)


def _so2() -> Builtin:
    act = so2_action()
    probes = [_fiber([0, 0], {"cluster_dims": [0]}), _fiber([1, 0], {"cluster_dims": [0]})]
    return Builtin("so2", "rotations of R^2", act.foliation(), act, [np.zeros(2), np.array([1.0, 0.0])], probes)


def _torus() -> Builtin:
    act = torus_action()
    probes = [_fiber([1, 0, 0, 0]),
              {"op": "closed_subgroup_check", "params": {"V": [[1, 2 ** 0.5]]}, "expect": {"ok": False}}]
    return Builtin("torus", "two commuting rotations of R^4 (closed-subgroup negative control)", act.foliation(),
                   act, [np.array([1.0, 0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0])], probes)


def _gl2() -> Builtin:
    act = gl2_action()
    return Builtin("gl2", "GL2 acting linearly on R^2", act.foliation(), act,
                   [np.zeros(2), np.array([0.0, 1.0])], [_fiber([0, 0])])


def _pullback(base: Callable[[], Builtin], m: int = 1) -> Callable[[], Builtin]:
    def make() -> Builtin:
        b = base()
        F = pullback_foliation(b.foliation, m)
        pts = [np.concatenate([p, np.zeros(m)]) for p in b.points]
        probes = [_fiber(p.tolist()) for p in pts[:2]]
        return Builtin(f"{b.name}_pullback{m}", f"pullback of {b.name} along R^{F.n} -> R^{b.foliation.n}",
                       F, None, pts, probes)

    return make


BUILTINS: dict[str, Callable[[], Builtin]] = {
    "sl2": _sl2,
    "sln": _sln,
    "bump": _bump,
    "vanish_origin": _vanish_origin,
    "regular": _regular,
    "so2": _so2,
    "torus": _torus,
    "gl2": _gl2,
    "sl2_pullback1": _pullback(_sl2),
    "bump_pullback1": _pullback(_bump),
}


def builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise InvalidInput(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
