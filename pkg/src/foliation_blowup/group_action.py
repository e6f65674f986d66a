"""
Blow-up of matrix Lie group actions.

An action is described infinitesimally by a basis A_1..A_k of a matrix Lie
algebra acting on R^n by x -> A x (+ b). Group elements are concrete matrices
(homogeneous (n+1) x (n+1) matrices when affine parts are present). Arrows of
the blow-up groupoid are triples (g, V, x) standing for the coset
(g exp(V), x); two triples are compared with :func:`coset_equal`, never by
matrix equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from . import grassmann, holonomy
from .blowup import BlowupFiberReport, BlowupPoint, FiberConfig, blowup_fiber
from .errors import INCONCLUSIVE, DimensionMismatch, InvalidInput, NotComposable, NotInAlgebra
from .foliation import FoliationModule, PolyVectorField, VectorField, isotropy
from .grassmann import DEFAULT_TOL, Subspace

LOG_CHART = 0.5  # the principal log is only trusted for ||h - I|| below this


class LieAlgebraAction:
    """Linear (or affine) action of a connected matrix group on R^n."""

    def __init__(self, basis: ArrayLike, affine: ArrayLike | None = None, name: str = ""):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise InvalidInput("basis must have shape (k, n, n)")
        self.k, self.n = basis.shape[0], basis.shape[1]
        self.basis = basis
        self.affine = None if affine is None else np.asarray(affine, dtype=float).reshape(self.k, self.n)
        self.name = name
        if self.affine is None:
            self.hat = basis.copy()
        else:
            hat = np.zeros((self.k, self.n + 1, self.n + 1))
            hat[:, : self.n, : self.n] = basis
            hat[:, : self.n, self.n] = self.affine
            self.hat = hat
        self.m = self.hat.shape[1]
        flat = self.hat.reshape(self.k, -1).T
        if np.linalg.matrix_rank(flat) != self.k:
            raise InvalidInput("algebra basis is linearly dependent")
        self._flat = flat
        self._pinv = np.linalg.pinv(flat)
        c = np.zeros((self.k, self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                comm = self.hat[i] @ self.hat[j] - self.hat[j] @ self.hat[i]
                coords, resid = self.coords(comm)
                if resid > 1e-10 * max(1.0, np.linalg.norm(comm)):
                    raise InvalidInput(f"basis is not closed under commutators (pair {i},{j}, residual {resid:.2e})")
                c[i, j] = coords
        self.structure_constants = c

    # -- algebra -----------------------------------------------------------
    def matrix(self, coords: ArrayLike) -> NDArray:
        """Algebra element sum_i c_i A_i as a (homogeneous) matrix."""
        return np.tensordot(np.asarray(coords, dtype=float), self.hat, axes=1)

    def coords(self, mat: ArrayLike) -> tuple[NDArray, float]:
        """Least-squares coordinates of a matrix in the algebra basis, with residual."""
        v = np.asarray(mat, dtype=float).reshape(-1)
        c = self._pinv @ v
        return c, float(np.linalg.norm(self._flat @ c - v))

    def exp(self, coords: ArrayLike) -> NDArray:
        return scipy.linalg.expm(self.matrix(coords))

    def identity(self) -> NDArray:
        return np.eye(self.m)

    def ad(self, coords: ArrayLike) -> NDArray:
        """Matrix of ad_T in algebra coordinates: column j is [T, A_j]."""
        return np.einsum("i,ijl->lj", np.asarray(coords, dtype=float), self.structure_constants)

    # -- action on R^n -----------------------------------------------------
    def act(self, g: ArrayLike, x: ArrayLike) -> NDArray:
        g = np.asarray(g, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.affine is None:
            return x @ g.T
        xh = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
        return (xh @ g.T)[..., : self.n]

    def anchor(self, x: ArrayLike) -> NDArray:
        """n x k matrix with columns A_i x + b_i."""
        x = np.asarray(x, dtype=float).reshape(self.n)
        cols = self.basis @ x
        if self.affine is not None:
            cols = cols + self.affine
        return cols.T

    def foliation(self) -> FoliationModule:
        gens = tuple(
            PolyVectorField.linear(self.basis[i], None if self.affine is None else self.affine[i]) for i in range(self.k)
        )
        return FoliationModule(self.n, gens, coeff_degree=2, name=self.name)

    def orbit(self, u: ArrayLike, ys: NDArray, s_grid: NDArray) -> NDArray:
        """Positions exp(s u) . y on a uniform grid of s, shape (S, N, n)."""
        ds = s_grid[1] - s_grid[0]
        step = scipy.linalg.expm(ds * self.matrix(u))
        cur = scipy.linalg.expm(s_grid[0] * self.matrix(u))
        out = np.empty((len(s_grid),) + ys.shape)
        for j in range(len(s_grid)):
            out[j] = self.act(cur, ys)
            cur = step @ cur
        return out

    def displacement(self, u: ArrayLike, y: NDArray, s: float, start=None) -> float:
        # expm is exact at any s, so the orbit point start is not needed
        return float(np.linalg.norm(self.act(self.exp(s * np.asarray(u)), y) - y))

    def isotropy_distance(self, y: NDArray, u: NDArray) -> float:
        h = isotropy_subalgebra(self, y)
        return float(np.linalg.norm(u - h.basis @ (h.basis.T @ u)))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "basis": self.basis.tolist(),
            "affine": None if self.affine is None else self.affine.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "LieAlgebraAction":
        try:
            return cls(data["basis"], data.get("affine"), str(data.get("name", "")))
        except KeyError as exc:
            raise InvalidInput(f"malformed action: missing {exc}") from exc

    def __repr__(self):
        return f"LieAlgebraAction({self.name!r}, k={self.k}, n={self.n})"


class FlowAction:
    """Action of R^k by the flows of commuting vector fields (e.g. the bump flow).

    Only the pieces that make sense without matrices are provided: the induced
    foliation, the anchor and orbits integrated by :func:`holonomy.flow`.
    """

    def __init__(self, fields: Sequence[VectorField], name: str = ""):
        self.fields = tuple(fields)
        self.k = len(self.fields)
        self.n = self.fields[0].n
        self.name = name
        self._F = FoliationModule(self.n, self.fields, coeff_degree=1, name=name)
        self.structure_constants = np.zeros((self.k, self.k, self.k))

    def foliation(self) -> FoliationModule:
        return self._F

    def anchor(self, x: ArrayLike) -> NDArray:
        return self._F.eval_batch(np.asarray(x, dtype=float).reshape(1, self.n))[0]

    def act_flow(self, u: ArrayLike, y: ArrayLike) -> NDArray:
        return holonomy.flow(self._F, y, u)

    def orbit(self, u: ArrayLike, ys: NDArray, s_grid: NDArray) -> NDArray:
        return holonomy.flow_trajectory(self._F, ys, np.asarray(u, dtype=float), s_grid)

    def displacement(self, u, y, s, start=None):
        return holonomy.flow_displacement(self._F, u, y, s, start)

    def isotropy_distance(self, y, u):
        h = isotropy(self._F, y)
        return float(np.linalg.norm(u - h.basis @ (h.basis.T @ u)))

    def __repr__(self):
        return f"FlowAction({self.name!r}, k={self.k}, n={self.n})"


# ---------------------------------------------------------------------------
# isotropy and fibers
# ---------------------------------------------------------------------------

def isotropy_subalgebra(act, x: ArrayLike, tol: float = DEFAULT_TOL) -> Subspace:
    """Kernel of the anchor at x, in algebra coordinates."""
    if isinstance(act, LieAlgebraAction):
        return grassmann.kernel(act.anchor(x), tol)
    return isotropy(act.foliation(), x, tol)


def blowup_fiber_action(act, x: ArrayLike, cfg: FiberConfig | None = None) -> BlowupFiberReport:
    """Blow-up fiber of the action at x, through the induced foliation."""
    return blowup_fiber(act.foliation(), x, cfg)


def adjoint_transport(act: LieAlgebraAction, g: ArrayLike, V: Subspace, tol: float = 1e-8) -> Subspace:
    """Ad(g) V re-expressed in algebra coordinates."""
    g = np.asarray(g, dtype=float)
    if V.ambient_dim != act.k:
        raise DimensionMismatch("V must live in the algebra coordinates")
    if V.dim == 0:
        return Subspace.zero(act.k)
    ginv = np.linalg.inv(g)
    images = []
    for w in V.basis.T:
        m = g @ act.matrix(w) @ ginv
        c, resid = act.coords(m)
        if resid > tol * max(1.0, np.linalg.norm(m)):
            raise NotInAlgebra(f"conjugate leaves the algebra (residual {resid:.2e})")
        images.append(c)
    return grassmann.orthonormalize(np.array(images).T, DEFAULT_TOL)


def left_trivialized_dexp(act: LieAlgebraAction, t: ArrayLike) -> NDArray:
    """Matrix of (1 - exp(-ad_T)) / ad_T in algebra coordinates.

    For a curve T + eps S this gives exp(T)^{-1} d/deps exp(T + eps S).
    """
    a = -act.ad(t)
    k = act.k
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = a
    block[:k, k:] = np.eye(k)
    return scipy.linalg.expm(block)[:k, k:]


# ---------------------------------------------------------------------------
# groupoid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupoidElement:
    """Representative (g, V, x) of the arrow (g exp(V), x)."""

    action: LieAlgebraAction = field(repr=False)
    g: NDArray
    V: Subspace
    x: NDArray

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(self.action.n))
        if self.g.shape != (self.action.m, self.action.m):
            raise DimensionMismatch("group element has the wrong shape")
        if self.V.ambient_dim != self.action.k:
            raise DimensionMismatch("V must live in the algebra coordinates")

    def is_valid(self, tol: float = 1e-6) -> bool:
        return grassmann.contains(isotropy_subalgebra(self.action, self.x), self.V, tol)

    def to_json(self) -> dict:
        return {"g": self.g.tolist(), "V": self.V.to_json(), "x": self.x.tolist()}


def unit(act: LieAlgebraAction, V: Subspace, x: ArrayLike) -> GroupoidElement:
    return GroupoidElement(act, act.identity(), V, x)


def source(gamma: GroupoidElement) -> BlowupPoint:
    return BlowupPoint(gamma.x, gamma.V)


def target(gamma: GroupoidElement) -> BlowupPoint:
    act = gamma.action
    return BlowupPoint(act.act(gamma.g, gamma.x), adjoint_transport(act, gamma.g, gamma.V))


def _same_point(p: BlowupPoint, q: BlowupPoint, tol: float) -> bool:
    scale = max(1.0, float(np.linalg.norm(p.base)))
    return (
        np.linalg.norm(np.asarray(p.base) - np.asarray(q.base)) <= tol * scale
        and p.subspace.dim == q.subspace.dim
        and grassmann.distance(p.subspace, q.subspace) <= tol * 10
    )


def compose(g1: GroupoidElement, g2: GroupoidElement, tol: float = 1e-8) -> GroupoidElement:
    """Product g1 . g2, defined when target(g2) = source(g1)."""
    if g1.action is not g2.action:
        raise NotComposable("arrows belong to different actions")
    if not _same_point(target(g2), source(g1), tol):
        raise NotComposable("target of the second arrow differs from the source of the first")
    return GroupoidElement(g1.action, g1.g @ g2.g, g2.V, g2.x)


def inverse(gamma: GroupoidElement) -> GroupoidElement:
    t = target(gamma)
    return GroupoidElement(gamma.action, np.linalg.inv(gamma.g), t.subspace, t.base)


def matrix_log(h: ArrayLike) -> NDArray | None:
    """Principal logarithm, or None outside the trusted chart ||h - I||_2 < 0.5."""
    h = np.asarray(h, dtype=float)
    if np.linalg.norm(h - np.eye(h.shape[0]), 2) >= LOG_CHART:
        return None
    return np.real(scipy.linalg.logm(h))


def local_log_membership(act: LieAlgebraAction, h: ArrayLike, V: Subspace, eta: float, tol: float = 1e-8):
    """Decide h in exp(V) from log(h) in V, valid when ||log h|| < eta.

    Returns True, False or INCONCLUSIVE.
    """
    L = matrix_log(h)
    if L is None:
        return INCONCLUSIVE
    c, resid = act.coords(L)
    if resid > 1e-8 * max(1.0, np.linalg.norm(L)):
        return INCONCLUSIVE
    if np.linalg.norm(c) >= eta:
        return INCONCLUSIVE
    perp = c - V.basis @ (V.basis.T @ c)
    return bool(np.linalg.norm(perp) <= tol)


def coset_equal(g1: GroupoidElement, g2: GroupoidElement, tol: float = 1e-8, eta: float = 1.0, max_steps: int = 50):
    """Semi-decision of g1 exp(V) == g2 exp(V): True, False or INCONCLUSIVE."""
    if not _same_point(source(g1), source(g2), max(tol, 1e-8)):
        return False
    act, V = g1.action, g1.V
    h = np.linalg.solve(g1.g, g2.g)
    for _ in range(max_steps):
        L = matrix_log(h)
        if L is not None:
            c, resid = act.coords(L)
            if resid <= 1e-8 * max(1.0, np.linalg.norm(L)):
                if np.linalg.norm(c) < eta:
                    perp = c - V.basis @ (V.basis.T @ c)
                    return bool(np.linalg.norm(perp) <= tol)
        # far from the identity: peel off the V-part of a principal log
        try:
            Lfar = scipy.linalg.logm(h)
        except (ValueError, np.linalg.LinAlgError):
            return INCONCLUSIVE
        if np.max(np.abs(np.imag(Lfar))) > 1e-8:
            return INCONCLUSIVE
        c, _ = act.coords(np.real(Lfar))
        w = V.basis @ (V.basis.T @ c)
        if np.linalg.norm(w) <= tol:
            return INCONCLUSIVE
        h = act.exp(-w) @ h
    return INCONCLUSIVE


def hblup_metric(g1: GroupoidElement, g2: GroupoidElement, sample_count: int = 64, seed: int = 0) -> float:
    """d_M + d_Grass + sampled coset distance (an upper bound of the coset term)."""
    act = g1.action
    d_m = float(np.linalg.norm(g1.x - g2.x))
    if g1.V.dim == g2.V.dim:
        d_v = grassmann.distance(g1.V, g2.V)
    else:
        d_v = grassmann.distance(g1.V, g2.V)
    rng = np.random.default_rng(seed)

    def cloud(gam: GroupoidElement) -> NDArray:
        pts = [gam.g]
        if gam.V.dim:
            for _ in range(sample_count):
                u = gam.V.basis @ rng.standard_normal(gam.V.dim)
                u *= rng.random() / max(np.linalg.norm(u), 1e-300)
                pts.append(gam.g @ act.exp(u))
        return np.array(pts).reshape(len(pts), -1)

    a, b = cloud(g1), cloud(g2)
    diff = a[:, None, :] - b[None, :, :]
    d_g = float(np.sqrt(np.min(np.sum(diff * diff, axis=2))))
    return d_m + d_v + d_g


def random_blowup_point(act: LieAlgebraAction, rng: np.random.Generator, scale: float = 1.0) -> BlowupPoint:
    """A random pair (V, x) with V inside the isotropy at x.

    A quarter of the draws sit at the origin with V the isotropy of a random
    direction (a fiber limit for linear actions); the rest take V = 0 or the
    full isotropy at a random x.
    """
    kind = rng.integers(4)
    if kind == 0 and act.affine is None:
        v = rng.standard_normal(act.n)
        return BlowupPoint(np.zeros(act.n), isotropy_subalgebra(act, v / np.linalg.norm(v)))
    x = scale * rng.standard_normal(act.n)
    V = isotropy_subalgebra(act, x) if kind >= 2 else Subspace.zero(act.k)
    return BlowupPoint(x, V)


def random_arrow(act: LieAlgebraAction, p: BlowupPoint, rng: np.random.Generator, scale: float = 0.5) -> GroupoidElement:
    """Arrow with source p and g = exp of a random algebra element."""
    return GroupoidElement(act, act.exp(scale * rng.standard_normal(act.k)), p.subspace, p.base)


def _rerepresent(gamma: GroupoidElement, rng: np.random.Generator, scale: float) -> GroupoidElement:
    # same coset, different matrix: g -> g exp(w) with w in V
    if gamma.V.dim == 0:
        return gamma
    w = gamma.V.basis @ (scale * rng.standard_normal(gamma.V.dim))
    return GroupoidElement(gamma.action, gamma.g @ gamma.action.exp(w), gamma.V, gamma.x)


@dataclass
class AxiomReport:
    samples: int
    checks: int
    conclusive: int
    failures: int
    failed: list = field(default_factory=list, repr=False)

    @property
    def conclusive_rate(self) -> float:
        return self.conclusive / self.checks if self.checks else 1.0

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "checks": self.checks,
            "conclusive": self.conclusive,
            "conclusive_rate": self.conclusive_rate,
            "failures": self.failures,
            "failed": self.failed,
        }


def _axiom_pairs(act, g1, g2, g3, rep):
    src, tgt = source(g3), target(g3)
    return {
        "right_unit": (compose(rep(g3), unit(act, src.subspace, src.base)), g3),
        "left_unit": (compose(unit(act, tgt.subspace, tgt.base), rep(g3)), g3),
        "left_inverse": (compose(inverse(rep(g3)), rep(g3)), unit(act, src.subspace, src.base)),
        "right_inverse": (compose(rep(g3), inverse(rep(g3))), unit(act, tgt.subspace, tgt.base)),
        "associativity": (
            compose(compose(rep(g1), rep(g2)), rep(g3)),
            compose(rep(g1), compose(rep(g2), rep(g3))),
        ),
    }


def groupoid_axiom_check(
    act: LieAlgebraAction, samples: int = 100, seed: int = 0, tol: float = 1e-8, rep_scale: float = 0.3
) -> AxiomReport:
    """Unit, inverse and associativity laws on random composable triples.

    Every comparison uses fresh representatives of the cosets involved, so the
    laws are tested on classes and not on matrices.
    """
    rng = np.random.default_rng(seed)
    checks = conclusive = failures = 0
    failed = []
    for i in range(samples):
        p = random_blowup_point(act, rng)
        g3 = random_arrow(act, p, rng)
        g2 = random_arrow(act, target(g3), rng)
        g1 = random_arrow(act, target(g2), rng)
        rep = lambda gam: _rerepresent(gam, rng, rep_scale)  # noqa: E731
        try:
            pairs = _axiom_pairs(act, g1, g2, g3, rep)
        except NotComposable:
            # products whose endpoints disagree break the laws outright
            checks += 1
            conclusive += 1
            failures += 1
            failed.append({"sample": i, "law": "composability"})
            continue
        for name, (a, b) in pairs.items():
            checks += 1
            res = coset_equal(a, b, tol=tol)
            if res is INCONCLUSIVE:
                continue
            conclusive += 1
            if not res:
                failures += 1
                failed.append({"sample": i, "law": name})
    return AxiomReport(samples, checks, conclusive, failures, failed)


# ---------------------------------------------------------------------------
# periodic bounding constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def points(self, resolution: int) -> NDArray:
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(self.lower, self.upper)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


@dataclass(frozen=True)
class Annulus:
    """Planar annulus r_in <= |y| <= r_out (polar grid)."""

    r_in: float
    r_out: float

    def points(self, resolution: int) -> NDArray:
        radii = np.linspace(self.r_in, self.r_out, max(2, resolution // 3))
        theta = 2 * np.pi * np.arange(resolution) / resolution
        return np.array([[r * np.cos(t), r * np.sin(t)] for r in radii for t in theta])


@dataclass(frozen=True)
class EtaConfig:
    grid: int = 8
    directions: int = 300
    T_max: float = 10.0
    scale_steps: int = 400
    return_tol: float = 1e-6
    refine: int = 3
    seed: int = 0


def sphere_directions(k: int, count: int, seed: int = 0) -> NDArray:
    """Roughly uniform unit vectors in R^k (Fibonacci lattice for k = 3)."""
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if k == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5**0.5) * i
        return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    d = np.random.default_rng(seed).standard_normal((count, k))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def eta_estimate(act, K, cfg: EtaConfig | None = None) -> holonomy.PeriodSearch:
    """Lower-bound search for the periodic bounding constant of the action on K."""
    cfg = cfg or EtaConfig()
    pts = K.points(cfg.grid) if hasattr(K, "points") else np.asarray(K, dtype=float)
    dirs = sphere_directions(act.k, cfg.directions, cfg.seed)
    return holonomy.periodic_search(act, pts, dirs, cfg.T_max, cfg.scale_steps, cfg.return_tol, cfg.refine)


# ---------------------------------------------------------------------------
# closedness and local embedding
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingResult:
    ok: bool
    pairs: int
    collisions: int
    inconclusive: int
    collision_examples: list = field(default_factory=list, repr=False)

    def __bool__(self):
        return self.ok


def embedding_check(
    act: LieAlgebraAction,
    p: BlowupPoint,
    radius: float = 0.1,
    grid: int = 5,
    nearby: Sequence[BlowupPoint] = (),
    tol: float = 1e-8,
) -> EmbeddingResult:
    """Look for X != X' in a ball of a transversal S with exp(X) exp(W) = exp(X') exp(W)."""
    S = grassmann.annihilator(p.subspace)
    if S.dim == 0:
        return EmbeddingResult(True, 0, 0, 0)
    axes = np.linspace(-radius, radius, grid)
    coords = np.stack(np.meshgrid(*([axes] * S.dim), indexing="ij"), axis=-1).reshape(-1, S.dim)
    coords = coords[np.linalg.norm(coords, axis=1) <= radius + 1e-12]
    Xs = coords @ S.basis.T
    exps = [act.exp(X) for X in Xs]
    points = [p, *nearby]
    pairs = collisions = inconclusive = 0
    examples = []
    for q in points:
        if not grassmann.contains(isotropy_subalgebra(act, q.base), q.subspace, 1e-6):
            raise InvalidInput("perturbed point is not a blow-up point")
        for a in range(len(Xs)):
            for b in range(a + 1, len(Xs)):
                pairs += 1
                res = coset_equal(
                    GroupoidElement(act, exps[a], q.subspace, q.base),
                    GroupoidElement(act, exps[b], q.subspace, q.base),
                    tol=tol,
                )
                if res is INCONCLUSIVE:
                    inconclusive += 1
                elif res:
                    collisions += 1
                    examples.append((Xs[a].tolist(), Xs[b].tolist()))
    return EmbeddingResult(collisions == 0, pairs, collisions, inconclusive, examples)


@dataclass
class ClosedSubgroupResult:
    ok: bool
    words: int
    in_chart: int
    violations: int

    def __bool__(self):
        return self.ok


def closed_subgroup_check(
    act: LieAlgebraAction,
    V: Subspace,
    words: int = 2000,
    max_length: int = 4,
    scale: float = 100.0,
    eta: float = 1.0,
    seed: int = 0,
    tol: float = 1e-6,
) -> ClosedSubgroupResult:
    """Random exp-words in V that return near the identity must have their log in V."""
    rng = np.random.default_rng(seed)
    in_chart = violations = 0
    if V.dim == 0:
        return ClosedSubgroupResult(True, 0, 0, 0)
    for _ in range(words):
        length = int(rng.integers(1, max_length + 1))
        h = act.identity()
        for _ in range(length):
            w = V.basis @ rng.uniform(-scale, scale, V.dim)
            h = h @ act.exp(w)
        res = local_log_membership(act, h, V, eta, tol)
        if res is INCONCLUSIVE:
            continue
        in_chart += 1
        if not res:
            violations += 1
    return ClosedSubgroupResult(violations == 0, words, in_chart, violations)
