"""
Path-holonomy bi-submersion charts.

The chart near x is (y, t) in R^n x R^k with source s(y, t) = y and range
r(y, t) = time-one flow of sum_i t_i X_i starting at y. Everything here is
chart-local: flows and their variational Jacobians, the leaf distribution of
a blow-up point on the source fiber, leaf traces, and searches for
short periodic returns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import math

import numpy as np
import scipy.optimize
from numpy.typing import ArrayLike, NDArray

from . import grassmann
from .errors import ClassUnresolved, FlowEscape, InvalidInput, RankDrop
from .foliation import FoliationModule, collocation_solve, default_collocation_samples, isotropy, sample_ball
from .grassmann import DEFAULT_TOL, Subspace

log = logging.getLogger(__name__)

MAX_STEPS = 2**15


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def _prep(F: FoliationModule, y: ArrayLike, t: ArrayLike):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != F.k or y.shape[-1] != F.n:
        raise InvalidInput(f"expected y in R^{F.n} and t in R^{F.k}")
    t = np.broadcast_to(t, (y.shape[0], F.k))
    return y, t, single


def _velocity(F: FoliationModule, z: NDArray, t: NDArray) -> NDArray:
    return F.velocity(z, t)


def _check_escape(z: NDArray, bound: float) -> None:
    if not np.all(np.isfinite(z)) or np.max(np.abs(z), initial=0.0) > bound:
        raise FlowEscape(f"flow left the ball of radius {bound:g}")


def _rk4_flow(F, y, t, steps, bound):
    h = 1.0 / steps
    z = y.copy()
    for _ in range(steps):
        k1 = _velocity(F, z, t)
        k2 = _velocity(F, z + 0.5 * h * k1, t)
        k3 = _velocity(F, z + 0.5 * h * k2, t)
        k4 = _velocity(F, z + h * k3, t)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_escape(z, bound)
    return z


def flow(
    F: FoliationModule,
    y: ArrayLike,
    t: ArrayLike,
    steps: int | None = None,
    tol: float = 1e-10,
    bound: float = 1e8,
) -> NDArray:
    """Time-one flow of sum_i t_i X_i from y (RK4, step doubling until converged).

    ``y`` may be a single point or a batch (N, n); ``t`` a vector or (N, k).
    """
    yb, tb, single = _prep(F, y, t)
    if steps is not None:
        out = _rk4_flow(F, yb, tb, steps, bound)
    else:
        n_steps = 16
        prev = _rk4_flow(F, yb, tb, n_steps, bound)
        while True:
            n_steps *= 2
            out = _rk4_flow(F, yb, tb, n_steps, bound)
            if np.max(np.abs(out - prev)) < tol * max(1.0, np.max(np.abs(out))) or n_steps >= MAX_STEPS:
                break
            prev = out
    return out[0] if single else out


def _var_rhs(F, z, Zy, Zt, t):
    vals = F.eval_batch(z)  # (N, n, k)
    J = np.einsum("nkab,nk->nab", F.jacobian_batch(z), t)
    dz = np.einsum("nak,nk->na", vals, t)
    return dz, J @ Zy, J @ Zt + vals


def _rk4_variational(F, y, t, steps, bound):
    N, n = y.shape
    z = y.copy()
    Zy = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    Zt = np.zeros((N, n, F.k))
    h = 1.0 / steps
    for _ in range(steps):
        a = _var_rhs(F, z, Zy, Zt, t)
        b = _var_rhs(F, z + 0.5 * h * a[0], Zy + 0.5 * h * a[1], Zt + 0.5 * h * a[2], t)
        c = _var_rhs(F, z + 0.5 * h * b[0], Zy + 0.5 * h * b[1], Zt + 0.5 * h * b[2], t)
        d = _var_rhs(F, z + h * c[0], Zy + h * c[1], Zt + h * c[2], t)
        z = z + (h / 6) * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        Zy = Zy + (h / 6) * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
        Zt = Zt + (h / 6) * (a[2] + 2 * b[2] + 2 * c[2] + d[2])
        _check_escape(z, bound)
    return z, Zy, Zt


def flow_with_jacobians(
    F: FoliationModule,
    y: ArrayLike,
    t: ArrayLike,
    steps: int | None = None,
    tol: float = 1e-10,
    bound: float = 1e8,
):
    """Endpoint r(y, t) with dr/dy (n x n) and dr/dt (n x k) from the variational ODE."""
    yb, tb, single = _prep(F, y, t)
    if steps is not None:
        res = _rk4_variational(F, yb, tb, steps, bound)
    else:
        n_steps = 16
        prev = _rk4_variational(F, yb, tb, n_steps, bound)
        while True:
            n_steps *= 2
            res = _rk4_variational(F, yb, tb, n_steps, bound)
            scale = max(1.0, np.max(np.abs(res[0])), np.max(np.abs(res[2]), initial=0.0))
            err = max(np.max(np.abs(a - b), initial=0.0) for a, b in zip(res, prev))
            if err < tol * scale or n_steps >= MAX_STEPS:
                break
            prev = res
    if single:
        return res[0][0], res[1][0], res[2][0]
    return res


def flow_jacobian_t(F: FoliationModule, y: ArrayLike, t: ArrayLike, steps: int | None = None) -> NDArray:
    """dr/dt at (y, t)."""
    return flow_with_jacobians(F, y, t, steps)[2]


def flow_trajectory(F: FoliationModule, ys: NDArray, u: NDArray, s_grid: NDArray, substeps: int = 8) -> NDArray:
    """Positions at times s_grid along the flow of sum_i u_i X_i, shape (S, N, n)."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    tb = np.broadcast_to(u, (ys.shape[0], F.k))
    out = np.empty((len(s_grid),) + ys.shape)
    z, s_prev = ys.copy(), 0.0
    gaps = np.diff(s_grid)
    ds = float(gaps.min()) if gaps.size else float(s_grid[0])
    for j, s in enumerate(s_grid):
        # long segments (the first one, typically) get proportionally more steps
        steps = substeps * max(1, math.ceil((s - s_prev) / ds - 1e-9))
        z = _rk4_flow(F, z, tb * (s - s_prev), steps, 1e8) if s > s_prev else z
        out[j] = z
        s_prev = s
    return out


# ---------------------------------------------------------------------------
# chart and leaf distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BiSubmersionChart:
    """Path-holonomy chart at x: s(y, t) = y, r(y, t) = exp_{sum t_i X_i}(y).

    ``minimal`` records the caller's assertion that the generators form a basis
    of the fiber of the module at x, so that the chart has dimension n + dim F_x.
    """

    F: FoliationModule
    x: NDArray
    radius: float = 1.0
    steps: int | None = None
    minimal: bool = True

    @property
    def dim(self) -> int:
        return self.F.n + self.F.k

    def s(self, y: ArrayLike, t: ArrayLike) -> NDArray:
        return np.asarray(y, dtype=float)

    def r(self, y: ArrayLike, t: ArrayLike) -> NDArray:
        if np.linalg.norm(t) > self.radius:
            raise InvalidInput("t outside the chart")
        return flow(self.F, y, t, self.steps)

    def carries_identity(self, tol: float = 1e-10) -> bool:
        return bool(np.linalg.norm(self.r(self.x, np.zeros(self.F.k)) - self.x) <= tol)


@dataclass(frozen=True)
class LeafConfig:
    tol: float = DEFAULT_TOL
    class_tol: float = 1e-6
    leaf_tol: float = 1e-6
    radius: float = 0.05
    samples: int | None = None
    seed: int = 0
    max_degree: int | None = None


@dataclass
class LeafClasses:
    """Kernel K0 = ker dr ∩ ker ds at u and the classes c(tau) of its basis."""

    kernel: Subspace
    classes: NDArray  # (k, dim K0)
    residual: float
    degree: int


def leaf_classes(F: FoliationModule, y: ArrayLike, t: ArrayLike, cfg: LeafConfig | None = None) -> LeafClasses:
    """Classes in R^k of the vectors tau in ker(dr/dt) at (y, t).

    A vector tau is extended to the field on the slice {t fixed} whose source
    projection is (dr/dy)^{-1} (dr/dt) tau; that field is written in the
    generators by collocation and its constant term at y is the class.
    """
    cfg = cfg or LeafConfig()
    y = np.asarray(y, dtype=float).reshape(F.n)
    t = np.asarray(t, dtype=float).reshape(F.k)
    _, _, Zt = flow_with_jacobians(F, y, t)
    K0 = grassmann.kernel(Zt, cfg.tol) if np.any(Zt) else Subspace.full(F.k)
    if K0.dim == 0:
        return LeafClasses(K0, np.zeros((F.k, 0)), 0.0, 0)
    D = F.coeff_degree if cfg.max_degree is None else cfg.max_degree
    count = cfg.samples or default_collocation_samples(F.n, D, F.k)
    pts = sample_ball(np.random.default_rng(cfg.seed), y, cfg.radius, count)
    _, Zy_s, Zt_s = flow_with_jacobians(F, pts, t)
    W = np.linalg.solve(Zy_s, Zt_s @ K0.basis)  # (N, n, dim K0)
    values = F.eval_batch(pts)
    best = None
    for deg in range(D + 1):
        const, res = collocation_solve(values, W, pts, y, cfg.radius, deg)
        if best is None or res < best[1]:
            best = (const, res, deg)
        if res <= cfg.class_tol:
            break
    const, res, deg = best
    if res > cfg.class_tol:
        raise ClassUnresolved(f"collocation residual {res:.2e} above {cfg.class_tol:g}", residual=res)
    return LeafClasses(K0, const, res, deg)


def leaf_distribution(
    F: FoliationModule, y: ArrayLike, t: ArrayLike, V: Subspace, cfg: LeafConfig | None = None
) -> Subspace:
    """Subspace of R^k (t-directions) tangent to the leaf through (y, t) for the blow-up point V."""
    cfg = cfg or LeafConfig()
    if V.ambient_dim != F.k:
        raise InvalidInput("V must be given in generator coordinates")
    lc = leaf_classes(F, y, t, cfg)
    if lc.kernel.dim == 0:
        return Subspace.zero(F.k)
    C = lc.classes
    off = C - V.basis @ (V.basis.T @ C)
    ref = float(np.linalg.norm(C, 2))
    inner = grassmann.kernel(off, cfg.leaf_tol, ref=ref)
    if inner.dim == 0:
        return Subspace.zero(F.k)
    return grassmann.orthonormalize(lc.kernel.basis @ inner.basis, DEFAULT_TOL)


def group_leaf_oracle(act, g: ArrayLike, x: ArrayLike, V: Subspace) -> Subspace:
    """Tangent of g exp(V) at g in the left trivialization: V itself."""
    if V.ambient_dim != act.k:
        raise InvalidInput("V must live in the algebra coordinates")
    return V


def oracle_leaf_distribution(act, t: ArrayLike, V: Subspace) -> Subspace:
    """Group oracle transported to chart coordinates at g = exp(sum t_i A_i).

    A chart direction tau corresponds to the left-trivialized tangent
    dexp_T(tau); the leaf is {tau : dexp_T(tau) in V}.
    """
    from .group_action import left_trivialized_dexp

    phi = left_trivialized_dexp(act, t)
    ref = group_leaf_oracle(act, act.exp(t), None, V)
    off = phi - ref.basis @ (ref.basis.T @ phi)
    return grassmann.kernel(off, 1e-10, ref=float(np.linalg.norm(phi, 2)))


@dataclass
class LeafTrace:
    y: NDArray
    points: NDArray  # (M, k) chart t-coordinates
    r_residual: NDArray  # (M,)
    distribution_dim: int

    def csv_rows(self) -> list[list]:
        return [[*p.tolist(), float(r)] for p, r in zip(self.points, self.r_residual)]


def leaf_trace(
    F: FoliationModule,
    y: ArrayLike,
    t: ArrayLike,
    V: Subspace,
    steps: int = 20,
    step_size: float = 1e-2,
    direction: ArrayLike | None = None,
    cfg: LeafConfig | None = None,
    r_tol: float = 1e-9,
) -> LeafTrace:
    """Follow the leaf distribution from (y, t) by projected Euler steps.

    Each step is projected onto the distribution and then pulled back onto the
    range fiber {r = r(y, t)} by Gauss-Newton in t.
    """
    cfg = cfg or LeafConfig()
    y = np.asarray(y, dtype=float).reshape(F.n)
    t = np.asarray(t, dtype=float).reshape(F.k).copy()
    r0 = flow(F, y, t)
    D = leaf_distribution(F, y, t, V, cfg)
    points, resid = [t.copy()], [0.0]
    if D.dim == 0:
        return LeafTrace(y, np.array(points), np.array(resid), 0)
    d = D.basis[:, 0] if direction is None else D.projector @ np.asarray(direction, dtype=float)
    if np.linalg.norm(d) == 0:
        raise InvalidInput("direction is orthogonal to the leaf distribution")
    d = d / np.linalg.norm(d)
    for _ in range(steps):
        t = t + step_size * d
        for _ in range(8):
            z, _, Zt = flow_with_jacobians(F, y, t)
            err = z - r0
            if np.linalg.norm(err) <= r_tol:
                break
            t = t - np.linalg.lstsq(Zt, err, rcond=None)[0]
        D_new = leaf_distribution(F, y, t, V, cfg)
        if D_new.dim != D.dim:
            raise RankDrop(f"leaf distribution dimension changed {D.dim} -> {D_new.dim}", location=t.tolist())
        d_new = D_new.projector @ d
        if np.linalg.norm(d_new) < 1e-8:
            raise RankDrop("trace direction left the distribution", location=t.tolist())
        d, D = d_new / np.linalg.norm(d_new), D_new
        points.append(t.copy())
        resid.append(float(np.linalg.norm(flow(F, y, t) - r0)))
    return LeafTrace(y, np.array(points), np.array(resid), D.dim)


def hblup_fiber_dim(F: FoliationModule, p, cfg: LeafConfig | None = None) -> int:
    """Dimension of the blow-up groupoid's source fiber at the blow-up point p."""
    D = leaf_distribution(F, p.base, np.zeros(F.k), p.subspace, cfg)
    return F.k - D.dim


# ---------------------------------------------------------------------------
# periodic returns
# ---------------------------------------------------------------------------

@dataclass
class Witness:
    y: NDArray
    Y: NDArray
    norm: float
    residual: float
    isotropy_distance: float


@dataclass
class PeriodSearch:
    eta_hat: float
    witnesses: list[Witness]
    near_returns: list[Witness] = field(repr=False)
    grid_spacing: float = 0.0
    points: int = 0
    directions: int = 0

    def csv_rows(self) -> list[list]:
        return [[*w.y.tolist(), *w.Y.tolist(), w.norm, w.residual] for w in self.witnesses]

    def to_json(self) -> dict:
        return {
            "eta_hat": self.eta_hat,
            "grid_spacing": self.grid_spacing,
            "points": self.points,
            "directions": self.directions,
            "witnesses": [
                {"y": w.y.tolist(), "Y": w.Y.tolist(), "norm": w.norm, "residual": w.residual} for w in self.witnesses
            ],
            "near_returns": len(self.near_returns),
        }


def flow_displacement(F: FoliationModule, u, y, s: float, start=None) -> float:
    """|exp(s u) y - y|, integrating from a known orbit point start = (s0, z0) when given."""
    u = np.asarray(u, dtype=float)
    s0, z0 = (0.0, y) if start is None else start
    return float(np.linalg.norm(flow(F, z0, (s - s0) * u) - y))


class FoliationFlows:
    """Adapter giving a foliation the orbit interface used by :func:`periodic_search`."""

    def __init__(self, F: FoliationModule):
        self.F = F
        self.k = F.k

    def orbit(self, u, ys, s_grid):
        return flow_trajectory(self.F, ys, np.asarray(u, dtype=float), s_grid)

    def displacement(self, u, y, s, start=None):
        return flow_displacement(self.F, u, y, s, start)

    def isotropy_distance(self, y, u):
        h = isotropy(self.F, y)
        return float(np.linalg.norm(u - h.basis @ (h.basis.T @ u)))


def _refine_return(system, u, y, lo, hi, z_lo=None):
    start = None if z_lo is None else (lo, z_lo)
    res = scipy.optimize.minimize_scalar(
        lambda s: system.displacement(u, y, s, start), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    return float(res.x), float(res.fun)


def _first_return(system, u, y, s_grid, return_tol):
    """First near-return of exp(s u) y on the grid, refined; None if there is none."""
    traj = system.orbit(u, y[None, :], s_grid)[:, 0, :]
    disp = np.linalg.norm(traj - y[None, :], axis=1)
    exc = np.maximum.accumulate(disp)
    for j in range(1, len(s_grid) - 1):
        if disp[j] <= disp[j - 1] and disp[j] <= disp[j + 1] and disp[j] < 0.25 * exc[j] and exc[j] > 1e-12:
            s, d = _refine_return(system, u, y, s_grid[j - 1], s_grid[j + 1], traj[j - 1])
            if d <= return_tol * exc[j]:
                return s, d / exc[j]
    return None


def periodic_search(
    system,
    points: NDArray,
    directions: NDArray,
    T_max: float = 10.0,
    scale_steps: int = 400,
    return_tol: float = 1e-6,
    refine: int = 3,
) -> PeriodSearch:
    """Search (y, s u) with exp(s u) y = y, u unit, s <= T_max.

    A near-return has displacement below ``return_tol`` times the largest
    excursion of the orbit before it; it is a witness when u is farther than
    ``10 * return_tol`` from the isotropy at y. The best witnesses are refined
    in direction by Nelder-Mead on the return time.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    s_grid = np.linspace(T_max / scale_steps, T_max, scale_steps)
    near, wit = [], []
    for u in directions:
        traj = system.orbit(u, points, s_grid)  # (S, N, n)
        disp = np.linalg.norm(traj - points[None, :, :], axis=2)
        exc = np.maximum.accumulate(disp, axis=0)
        for i, y in enumerate(points):
            d, e = disp[:, i], exc[:, i]
            for j in range(1, scale_steps - 1):
                if not (d[j] <= d[j - 1] and d[j] <= d[j + 1] and d[j] < 0.25 * e[j] and e[j] > 1e-12):
                    continue
                s, dmin = _refine_return(system, u, y, s_grid[j - 1], s_grid[j + 1], traj[j - 1, i])
                if dmin > return_tol * e[j]:
                    continue
                iso = system.isotropy_distance(y, u)
                w = Witness(y.copy(), s * u, s, dmin / e[j], iso)
                near.append(w)
                if iso > 10 * return_tol:
                    wit.append(w)
                    break

    if wit and refine:
        wit.sort(key=lambda w: w.norm)
        for w in wit[:refine]:
            refined = _refine_direction(system, w, s_grid[1] - s_grid[0], return_tol)
            if refined is not None:
                wit.append(refined)
    wit.sort(key=lambda w: w.norm)
    eta = wit[0].norm if wit else T_max
    return PeriodSearch(eta, wit, near, float(s_grid[1] - s_grid[0]), len(points), len(directions))


def _refine_direction(system, w: Witness, ds: float, return_tol: float) -> Witness | None:
    u0 = w.Y / w.norm
    k = u0.size
    if k == 1:
        return None
    # orthonormal basis of the tangent plane at u0
    q, _ = np.linalg.qr(np.column_stack([u0, np.eye(k)]))
    tangent = q[:, 1:k]
    s0 = w.norm

    def return_time(v):
        u = u0 + tangent @ v
        u = u / np.linalg.norm(u)
        grid = np.linspace(0.5 * s0, 1.5 * s0, 101)
        found = _first_return(system, u, w.y, grid, return_tol)
        if found is None:
            return 10 * s0, None
        return found[0], (u, found)

    val = lambda v: return_time(v)[0]  # noqa: E731
    res = scipy.optimize.minimize(
        val, np.zeros(k - 1), method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-10, "initial_simplex": np.vstack([np.zeros(k - 1), 0.05 * np.eye(k - 1)])},
    )
    s, info = return_time(res.x)
    if info is None:
        return None
    u, (s_ret, rel) = info
    iso = system.isotropy_distance(w.y, u)
    if iso <= 10 * return_tol:
        return None
    return Witness(w.y.copy(), s_ret * u, s_ret, rel, iso)


def period_bound_foliation(
    F: FoliationModule,
    K,
    grid: int = 8,
    directions: int = 64,
    T_max: float = 10.0,
    scale_steps: int = 400,
    return_tol: float = 1e-6,
    refine: int = 0,
    seed: int = 0,
) -> PeriodSearch:
    """Periodic-return search for the chart flows of a foliation on K."""
    from .group_action import sphere_directions

    pts = K.points(grid) if hasattr(K, "points") else np.asarray(K, dtype=float)
    dirs = sphere_directions(F.k, directions, seed)
    return periodic_search(FoliationFlows(F), pts, dirs, T_max, scale_steps, return_tol, refine)
