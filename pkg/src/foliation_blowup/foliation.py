"""
Singular foliations given by finitely many vector-field generators.

Generators are usually polynomial (:class:`PolyVectorField`), which makes
brackets exact. Smooth non-polynomial generators such as the bump flow are
supported through :class:`FunctionVectorField`; they only need values and
Jacobians.

All pointwise quantities are expressed in *generator coordinates*: a vector
``c`` in R^k stands for the class of ``sum_i c_i X_i``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import grassmann
from .errors import DimensionMismatch, InvalidInput, NotBracketClosed
from .grassmann import DEFAULT_TOL, Subspace

Exponent = tuple[int, ...]
Poly = dict[Exponent, float]


# ---------------------------------------------------------------------------
# polynomial helpers (dense exponent -> coefficient maps)
# ---------------------------------------------------------------------------

def _clean(p: Mapping[Exponent, float]) -> Poly:
    return {e: float(c) for e, c in p.items() if c != 0.0}


def poly_add(p: Poly, q: Poly, scale: float = 1.0) -> Poly:
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0.0) + scale * c
    return _clean(out)


def poly_mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for (e1, c1), (e2, c2) in itertools.product(p.items(), q.items()):
        e = tuple(a + b for a, b in zip(e1, e2))
        out[e] = out.get(e, 0.0) + c1 * c2
    return _clean(out)


def poly_diff(p: Poly, var: int) -> Poly:
    out: Poly = {}
    for e, c in p.items():
        if e[var] == 0:
            continue
        e2 = list(e)
        e2[var] -= 1
        out[tuple(e2)] = out.get(tuple(e2), 0.0) + c * e[var]
    return _clean(out)


def monomial_exponents(n: int, degree: int) -> list[Exponent]:
    """All exponent vectors in n variables of total degree <= degree, graded order."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def eval_monomials(pts: NDArray, exps: Sequence[Exponent]) -> NDArray:
    """Matrix of monomial values, shape (N, len(exps))."""
    if len(exps) == 0:
        return np.zeros((pts.shape[0], 0))
    e = np.asarray(exps, dtype=int)
    return np.prod(pts[:, None, :] ** e[None, :, :], axis=2)


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

class VectorField:
    """Interface: values and Jacobians on batches of points of shape (N, n)."""

    n: int

    def __call__(self, pts: ArrayLike) -> NDArray:
        raise NotImplementedError

    def jacobian(self, pts: ArrayLike) -> NDArray:
        raise NotImplementedError

    def evaluate_scaled(self, pts: ArrayLike) -> tuple[NDArray, NDArray]:
        """Return ``(values, log_scale)`` with field = exp(log_scale) * values.

        Fields that are flat to all orders somewhere override this so that rank
        decisions survive values far below the floating-point range.
        """
        pts = _as_points(pts, self.n)
        return self(pts), np.zeros(pts.shape[0])


def _as_points(pts: ArrayLike, n: int) -> NDArray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != n:
        raise DimensionMismatch(f"expected points in R^{n}, got shape {arr.shape}")
    return arr


class PolyVectorField(VectorField):
    """Vector field whose components are real polynomials."""

    def __init__(self, components: Sequence[Mapping[Sequence[int], float]], n: int | None = None):
        comps = [_clean({tuple(int(a) for a in e): c for e, c in comp.items()}) for comp in components]
        if n is None:
            n = len(comps)
        if len(comps) != n:
            raise DimensionMismatch("a vector field on R^n needs n components")
        for comp in comps:
            for e in comp:
                if len(e) != n:
                    raise DimensionMismatch(f"exponent {e} does not have {n} entries")
                if min(e) < 0:
                    raise InvalidInput("negative exponent")
        self.n = n
        self.components: tuple[Poly, ...] = tuple(comps)
        self._exps = sorted({e for comp in comps for e in comp})
        self._coef = np.array([[comp.get(e, 0.0) for e in self._exps] for comp in comps]).reshape(
            n, len(self._exps)
        )
        self._partials: list[PolyVectorField] | None = None

    @classmethod
    def linear(cls, a: ArrayLike, b: ArrayLike | None = None) -> "PolyVectorField":
        """The field x -> A x (+ b)."""
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        comps = []
        for i in range(n):
            comp: Poly = {}
            for j in range(n):
                if a[i, j] != 0:
                    e = [0] * n
                    e[j] = 1
                    comp[tuple(e)] = a[i, j]
            if b is not None and b[i] != 0:
                comp[(0,) * n] = float(b[i])
            comps.append(comp)
        return cls(comps, n)

    @classmethod
    def constant(cls, v: ArrayLike) -> "PolyVectorField":
        v = np.asarray(v, dtype=float)
        n = v.size
        return cls([{(0,) * n: float(c)} if c else {} for c in v], n)

    @property
    def degree(self) -> int:
        return max((sum(e) for comp in self.components for e in comp), default=0)

    def is_zero(self) -> bool:
        return all(len(c) == 0 for c in self.components)

    def __call__(self, pts):
        pts = _as_points(pts, self.n)
        return eval_monomials(pts, self._exps) @ self._coef.T

    def partial(self, var: int) -> "PolyVectorField":
        if self._partials is None:
            self._partials = [
                PolyVectorField([poly_diff(c, b) for c in self.components], self.n) for b in range(self.n)
            ]
        return self._partials[var]

    def jacobian(self, pts):
        pts = _as_points(pts, self.n)
        return np.stack([self.partial(b)(pts) for b in range(self.n)], axis=2)

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([poly_add(p, q) for p, q in zip(self.components, other.components)], self.n)

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([poly_add(p, q, -1.0) for p, q in zip(self.components, other.components)], self.n)

    def scale(self, s: float) -> "PolyVectorField":
        return PolyVectorField([{e: s * c for e, c in p.items()} for p in self.components], self.n)

    def derivative_along(self, other: "PolyVectorField") -> "PolyVectorField":
        """Componentwise directional derivative (D self) other."""
        comps = []
        for p in self.components:
            acc: Poly = {}
            for b in range(self.n):
                acc = poly_add(acc, poly_mul(poly_diff(p, b), other.components[b]))
            comps.append(acc)
        return PolyVectorField(comps, self.n)

    def extend(self, m: int) -> "PolyVectorField":
        """Constant extension to R^{n+m}: no dependence on, and no component along, the new variables."""
        comps = [{e + (0,) * m: c for e, c in p.items()} for p in self.components]
        comps += [{} for _ in range(m)]
        return PolyVectorField(comps, self.n + m)

    def allclose(self, other: "PolyVectorField", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for comp in diff.components for c in comp.values())

    def to_json(self) -> dict:
        return {
            "components": [
                [{"exponents": list(e), "coeff": c} for e, c in sorted(comp.items())] for comp in self.components
            ]
        }

    @classmethod
    def from_json(cls, data: dict, n: int) -> "PolyVectorField":
        comps = []
        for comp in data["components"]:
            p: Poly = {}
            for term in comp:
                e = tuple(int(a) for a in term["exponents"])
                p[e] = p.get(e, 0.0) + float(term["coeff"])
            comps.append(p)
        return cls(comps, n)

    def __repr__(self):
        return f"PolyVectorField(n={self.n}, degree={self.degree})"


class FunctionVectorField(VectorField):
    """Vector field defined by callables (values and Jacobian), batch-evaluated."""

    def __init__(
        self,
        n: int,
        func: Callable[[NDArray], NDArray],
        jac: Callable[[NDArray], NDArray],
        scaled: Callable[[NDArray], tuple[NDArray, NDArray]] | None = None,
        name: str = "field",
    ):
        self.n = n
        self._func = func
        self._jac = jac
        self._scaled = scaled
        self.name = name

    def __call__(self, pts):
        return self._func(_as_points(pts, self.n))

    def jacobian(self, pts):
        return self._jac(_as_points(pts, self.n))

    def evaluate_scaled(self, pts):
        pts = _as_points(pts, self.n)
        if self._scaled is None:
            return self(pts), np.zeros(pts.shape[0])
        return self._scaled(pts)

    def __repr__(self):
        return f"FunctionVectorField({self.name!r}, n={self.n})"


class ExtendedField(VectorField):
    """Constant extension of an arbitrary field to R^{n+m}."""

    def __init__(self, base: VectorField, m: int):
        self.base = base
        self.m = m
        self.n = base.n + m

    def __call__(self, pts):
        pts = _as_points(pts, self.n)
        v = self.base(pts[:, : self.base.n])
        return np.hstack([v, np.zeros((pts.shape[0], self.m))])

    def jacobian(self, pts):
        pts = _as_points(pts, self.n)
        out = np.zeros((pts.shape[0], self.n, self.n))
        out[:, : self.base.n, : self.base.n] = self.base.jacobian(pts[:, : self.base.n])
        return out

    def evaluate_scaled(self, pts):
        pts = _as_points(pts, self.n)
        v, s = self.base.evaluate_scaled(pts[:, : self.base.n])
        return np.hstack([v, np.zeros((pts.shape[0], self.m))]), s


def bracket(x: PolyVectorField, y: PolyVectorField) -> PolyVectorField:
    """Exact Lie bracket [X, Y] = (DY) X - (DX) Y."""
    if x.n != y.n:
        raise DimensionMismatch("fields live on different spaces")
    return y.derivative_along(x) - x.derivative_along(y)


def bracket_values(x: VectorField, y: VectorField, pts: ArrayLike) -> NDArray:
    """Pointwise [X, Y](p) from values and Jacobians; works for any field type."""
    pts = _as_points(pts, x.n)
    return np.einsum("nab,nb->na", y.jacobian(pts), x(pts)) - np.einsum("nab,nb->na", x.jacobian(pts), y(pts))


# ---------------------------------------------------------------------------
# the module
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoliationModule:
    """A singular foliation on R^n through an ordered family of generators."""

    n: int
    generators: tuple[VectorField, ...]
    coeff_degree: int = 2
    name: str = ""

    def __post_init__(self):
        gens = tuple(self.generators)
        if len(gens) < 1:
            raise InvalidInput("a foliation module needs at least one generator")
        for g in gens:
            if g.n != self.n:
                raise DimensionMismatch("all generators must share the ambient dimension")
        object.__setattr__(self, "generators", gens)

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def is_polynomial(self) -> bool:
        return all(isinstance(g, PolyVectorField) for g in self.generators)

    def _poly_tensor(self) -> tuple[list[Exponent], NDArray] | None:
        """Shared monomials and coefficients C[m, a, i] of all polynomial generators."""
        if "_poly" not in self.__dict__:
            poly = None
            if self.is_polynomial:
                exps = sorted({e for g in self.generators for e in g._exps})
                index = {e: m for m, e in enumerate(exps)}
                C = np.zeros((len(exps), self.n, self.k))
                for i, g in enumerate(self.generators):
                    for j, e in enumerate(g._exps):
                        C[index[e], :, i] = g._coef[:, j]
                poly = (exps, C)
            object.__setattr__(self, "_poly", poly)
        return self.__dict__["_poly"]

    def eval_batch(self, pts: ArrayLike) -> NDArray:
        """Evaluation matrices, shape (N, n, k)."""
        pts = _as_points(pts, self.n)
        poly = self._poly_tensor()
        if poly is not None:
            exps, C = poly
            return np.einsum("nm,mak->nak", eval_monomials(pts, exps), C)
        return np.stack([g(pts) for g in self.generators], axis=2)

    def velocity(self, pts: ArrayLike, t: NDArray) -> NDArray:
        """Values of sum_i t_i X_i at each point; t has shape (k,) or (N, k)."""
        pts = _as_points(pts, self.n)
        poly = self._poly_tensor()
        if poly is None:
            return np.einsum("nak,nk->na", self.eval_batch(pts), np.broadcast_to(t, (pts.shape[0], self.k)))
        exps, C = poly
        mono = eval_monomials(pts, exps)
        if np.ndim(t) == 1:
            return mono @ (C @ t)
        return np.einsum("nm,mak,nk->na", mono, C, t)

    def scaled_eval_parts(self, pts: ArrayLike) -> tuple[NDArray, NDArray]:
        """Column-normalized evaluations and per-column log scales.

        Column i of the true evaluation equals exp(log_scale[:, i]) times column
        i of the first array. Flat generators (bump functions) stay representable
        near the edge of their support.
        """
        pts = _as_points(pts, self.n)
        vals, scales = zip(*(g.evaluate_scaled(pts) for g in self.generators))
        return np.stack(vals, axis=2), np.stack(scales, axis=1)

    def scaled_eval_batch(self, pts: ArrayLike) -> NDArray:
        """Evaluation matrices with each column rescaled by a positive scalar.

        Ranks and column spans are unchanged by the rescaling; kernels are not,
        use :func:`kernels_batch` for those.
        """
        return self.scaled_eval_parts(pts)[0]

    def jacobian_batch(self, pts: ArrayLike) -> NDArray:
        """Generator Jacobians, shape (N, k, n, n)."""
        pts = _as_points(pts, self.n)
        return np.stack([g.jacobian(pts) for g in self.generators], axis=1)

    def to_json(self) -> dict:
        if not self.is_polynomial:
            raise InvalidInput("only polynomial modules have a JSON form")
        return {
            "n": self.n,
            "generators": [g.to_json() for g in self.generators],  # type: ignore[attr-defined]
            "coeff_degree": self.coeff_degree,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FoliationModule":
        try:
            n = int(data["n"])
            gens = tuple(PolyVectorField.from_json(g, n) for g in data["generators"])
            return cls(n, gens, int(data.get("coeff_degree", 2)), str(data.get("name", "")))
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed foliation module: {exc}") from exc


def eval_matrix(F: FoliationModule, y: ArrayLike) -> NDArray:
    """n x k matrix whose i-th column is X_i(y)."""
    return F.eval_batch(np.asarray(y, dtype=float).reshape(1, F.n))[0]


def kernels_batch(F: FoliationModule, pts: ArrayLike, tol: float = DEFAULT_TOL) -> list[Subspace]:
    """Kernels of the evaluation at each point, decided on the rescaled columns.

    If M = M' diag(exp(s)) then ker M = diag(exp(-s)) ker M'.
    """
    mats, logs = F.scaled_eval_parts(pts)
    N, _, k = mats.shape
    _, sv, vt = np.linalg.svd(mats, full_matrices=True)
    out = []
    for i in range(N):
        top = sv[i, 0] if sv.shape[1] else 0.0
        cut = tol * top if top > 0 else tol
        rank = int(np.sum(sv[i] > cut))
        basis = vt[i, rank:].T
        if basis.shape[1] and np.ptp(logs[i]) > 0:
            factors = np.exp(logs[i].min() - logs[i])
            out.append(grassmann.orthonormalize(factors[:, None] * basis, 1e-12))
        else:
            out.append(Subspace(k, grassmann._canonical_signs(basis.copy())))
    return out


def isotropy(F: FoliationModule, x: ArrayLike, tol: float = DEFAULT_TOL) -> Subspace:
    """Kernel of the evaluation at x, in generator coordinates."""
    return kernels_batch(F, np.asarray(x, dtype=float).reshape(1, F.n), tol)[0]


def tangent_fiber(F: FoliationModule, x: ArrayLike, tol: float = DEFAULT_TOL) -> Subspace:
    """Span of the generator values at x, a subspace of R^n."""
    m = F.scaled_eval_batch(np.asarray(x, dtype=float).reshape(1, F.n))[0]
    return grassmann.orthonormalize(m, tol)


def batch_ranks(mats: NDArray, tol: float = DEFAULT_TOL) -> NDArray:
    """Numerical ranks of a stack of matrices at relative tolerance ``tol``."""
    if mats.shape[1] == 0 or mats.shape[2] == 0:
        return np.zeros(mats.shape[0], dtype=int)
    s = np.linalg.svd(mats, compute_uv=False)
    top = s[:, :1]
    return np.where(top[:, 0] > 0, np.sum(s > tol * top, axis=1), 0)


@dataclass(frozen=True)
class RegularTest:
    is_regular: bool
    dim_F: int
    dim_h: int


def sample_ball(rng: np.random.Generator, center: NDArray, radius: float, count: int) -> NDArray:
    n = center.size
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return center[None, :] + d * r[:, None]


def regular_test(
    F: FoliationModule,
    x: ArrayLike,
    radius: float = 0.1,
    samples: int = 8,
    tol: float = DEFAULT_TOL,
    seed: int | np.random.Generator = 0,
) -> RegularTest:
    """Probe continuity of y -> dim F_y on a ball around x."""
    if radius <= 0:
        raise InvalidInput("radius must be positive")
    if samples < 8:
        raise InvalidInput("at least 8 samples are required")
    x = np.asarray(x, dtype=float).reshape(F.n)
    rng = np.random.default_rng(seed)
    pts = np.vstack([x[None, :], sample_ball(rng, x, radius, samples)])
    ranks = batch_ranks(F.scaled_eval_batch(pts), tol)
    dim_f = int(ranks[0])
    return RegularTest(bool(np.all(ranks == dim_f)), dim_f, F.k - dim_f)


# ---------------------------------------------------------------------------
# structure functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureFunctions:
    """Values f[i, j, l] at the basepoint with [X_i, X_j] = sum_l f_ij^l X_l."""

    f: NDArray
    residual: float
    degree: int


def default_collocation_samples(n: int, degree: int, k: int) -> int:
    return 4 * math.comb(n + degree, degree) * k


def _relative_residual(a: NDArray, coef: NDArray, b: NDArray) -> float:
    r = np.linalg.norm(a @ coef - b)
    nb = np.linalg.norm(b)
    na = np.linalg.norm(a)
    if nb > 1e-13 * max(na, 1e-300):
        return float(r / nb)
    return float(r / na) if na > 0 else float(r)


def collocation_solve(
    values: NDArray, rhs: NDArray, pts: NDArray, center: NDArray, radius: float, degree: int
) -> tuple[NDArray, float]:
    """Fit rhs(y) = sum_l f_l(y) X_l(y) with polynomial f_l of the given degree.

    ``values`` has shape (N, n, k), ``rhs`` (N, n, r) for r right-hand sides.
    Returns the constant terms f_l(center) (shape (k, r)) and the worst relative
    residual over the right-hand sides.
    """
    N, n, k = values.shape
    exps = monomial_exponents(n, degree)
    mono = eval_monomials((pts - center[None, :]) / radius, exps)  # (N, M)
    design = (values[:, :, :, None] * mono[:, None, None, :]).reshape(N * n, k * len(exps))
    b = rhs.reshape(N * n, -1)
    coef, *_ = np.linalg.lstsq(design, b, rcond=None)
    res = max((_relative_residual(design, coef[:, j], b[:, j]) for j in range(b.shape[1])), default=0.0)
    const = coef.reshape(k, len(exps), -1)[:, 0, :]
    return const, res


def structure_functions_at(
    F: FoliationModule,
    x: ArrayLike,
    samples: int | None = None,
    tol: float = 1e-6,
    seed: int | np.random.Generator = 0,
    radius: float = 0.05,
    max_degree: int | None = None,
) -> StructureFunctions:
    """Structure functions f_ij^l evaluated at x by neighbourhood collocation.

    The ansatz degree is raised from 0 up to ``F.coeff_degree`` until every
    bracket is reproduced within ``tol``; the lowest sufficient degree is used.
    """
    x = np.asarray(x, dtype=float).reshape(F.n)
    D = F.coeff_degree if max_degree is None else max_degree
    k = F.k
    if samples is None:
        samples = default_collocation_samples(F.n, D, k)
    rng = np.random.default_rng(seed)
    pts = sample_ball(rng, x, radius, samples)
    values = F.eval_batch(pts)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    if not pairs:
        return StructureFunctions(np.zeros((k, k, k)), 0.0, 0)
    rhs = np.stack([bracket_values(F.generators[i], F.generators[j], pts) for i, j in pairs], axis=2)
    best = None
    for deg in range(D + 1):
        const, res = collocation_solve(values, rhs, pts, x, radius, deg)
        if best is None or res < best[1]:
            best = (const, res, deg)
        if res <= tol:
            break
    const, res, deg = best
    if res > tol:
        raise NotBracketClosed(
            f"brackets not reproduced by a degree-{D} ansatz (residual {res:.2e})", residual=res
        )
    f = np.zeros((k, k, k))
    for col, (i, j) in enumerate(pairs):
        f[i, j, :] = const[:, col]
        f[j, i, :] = -const[:, col]
    return StructureFunctions(f, res, deg)


def pullback_foliation(F: FoliationModule, m: int) -> FoliationModule:
    """Pull back along the projection R^{n+m} -> R^n.

    Generators: the constant extensions of X_1..X_k followed by d/dt_1..d/dt_m.
    """
    if m < 1:
        raise InvalidInput("m must be at least 1")
    gens: list[VectorField] = []
    for g in F.generators:
        gens.append(g.extend(m) if isinstance(g, PolyVectorField) else ExtendedField(g, m))
    for j in range(m):
        e = np.zeros(F.n + m)
        e[F.n + j] = 1.0
        gens.append(PolyVectorField.constant(e))
    name = f"{F.name}+pullback{m}" if F.name else f"pullback{m}"
    return FoliationModule(F.n + m, tuple(gens), F.coeff_degree, name)
