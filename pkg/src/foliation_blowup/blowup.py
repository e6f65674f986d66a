"""
Blow-up fibers by sampling regular sequences that approach a point.

Along each ray ``x_n = x + decay**n * r0 * v`` the isotropy kernel of the
evaluation matrix is computed; the limits of those kernels, clustered in the
Grassmannian, form a sampled under-approximation of the blow-up fiber at x.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import grassmann
from .errors import InvalidInput, NoRegularApproach
from .foliation import (
    FoliationModule,
    batch_ranks,
    isotropy,
    kernels_batch,
    pullback_foliation,
    sample_ball,
    structure_functions_at,
)
from .grassmann import DEFAULT_TOL, Subspace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiberConfig:
    rays: int = 64
    decay: float = 0.5
    steps: int = 20
    r0: float = 0.5
    tol: float = DEFAULT_TOL
    regular_only: bool = True
    conv_tol: float = 1e-7
    cluster_tol: float = 1e-3
    seed: int = 0
    extrapolate: bool = True
    regular_samples: int = 8
    regular_radius: float = 0.5  # fraction of the distance to the basepoint
    directions: tuple[tuple[float, ...], ...] | None = None
    extra_directions: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise InvalidInput("decay must lie in (0, 1)")
        if self.steps < 10:
            raise InvalidInput("at least 10 steps per ray are required")
        if self.directions is None and self.rays < 8:
            raise InvalidInput("at least 8 rays are required")
        if self.r0 <= 0 or self.tol <= 0:
            raise InvalidInput("r0 and tol must be positive")

    def with_directions(self, dirs: ArrayLike, append: bool = False) -> "FiberConfig":
        tup = tuple(tuple(float(c) for c in d) for d in np.atleast_2d(np.asarray(dirs, dtype=float)))
        if append:
            return replace(self, extra_directions=self.extra_directions + tup)
        return replace(self, directions=tup)


@dataclass(frozen=True, eq=False)
class BlowupPoint:
    """A point (V, x) of the blow-up; V is given in generator coordinates."""

    base: NDArray
    subspace: Subspace
    direction_tag: NDArray | None = None

    def to_json(self) -> dict:
        return {
            "base": np.asarray(self.base).tolist(),
            "subspace": self.subspace.to_json(),
            "direction": None if self.direction_tag is None else np.asarray(self.direction_tag).tolist(),
        }


@dataclass(frozen=True)
class FiberProperties:
    containment_ok: bool
    subalgebra_residual: float


@dataclass
class RayRecord:
    direction: NDArray
    used_points: int
    limit: Subspace | None
    label: int | None


@dataclass
class BlowupFiberReport:
    base: NDArray
    clusters: list[BlowupPoint]
    rays_sampled: int
    non_convergent_rays: int
    skipped_rays: int
    rays: list[RayRecord] = field(repr=False)
    config: FiberConfig = field(repr=False, default_factory=FiberConfig)
    property_report: FiberProperties | None = None

    @property
    def subspaces(self) -> list[Subspace]:
        return [c.subspace for c in self.clusters]

    @property
    def dims(self) -> list[int]:
        return [c.subspace.dim for c in self.clusters]

    def to_json(self) -> dict:
        return {
            "base": np.asarray(self.base).tolist(),
            "clusters": [c.to_json() for c in self.clusters],
            "rays_sampled": self.rays_sampled,
            "non_convergent_rays": self.non_convergent_rays,
            "skipped_rays": self.skipped_rays,
            "rays": [
                {
                    "direction": r.direction.tolist(),
                    "used_points": r.used_points,
                    "label": r.label,
                    "limit": None if r.limit is None else r.limit.to_json(),
                }
                for r in self.rays
            ],
            "config": {k: v for k, v in asdict(self.config).items()},
            "property_report": None if self.property_report is None else asdict(self.property_report),
        }

    def csv_rows(self) -> list[list]:
        """(direction..., label, dim, limit basis flattened) per ray."""
        rows = []
        for r in self.rays:
            basis = [] if r.limit is None else r.limit.basis.T.ravel().tolist()
            rows.append(
                [*r.direction.tolist(), "" if r.label is None else r.label, "" if r.limit is None else r.limit.dim, *basis]
            )
        return rows


def ray_directions(n: int, count: int, rng: np.random.Generator) -> NDArray:
    """Unit directions spread over the sphere.

    In dimension 1 the two directions alternate; in dimension 2 they are equally
    spaced with a random offset; otherwise they are Gaussian.
    """
    if n == 1:
        return np.array([[1.0] if i % 2 == 0 else [-1.0] for i in range(count)])
    if n == 2:
        theta = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    d = rng.standard_normal((count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _fiber_directions(n: int, cfg: FiberConfig) -> NDArray:
    rng = np.random.default_rng(cfg.seed)
    if cfg.directions is not None:
        dirs = np.asarray(cfg.directions, dtype=float).reshape(-1, n)
    else:
        dirs = ray_directions(n, cfg.rays, rng)
    if cfg.extra_directions:
        dirs = np.vstack([dirs, np.asarray(cfg.extra_directions, dtype=float).reshape(-1, n)])
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InvalidInput("ray directions must be non-zero")
    return dirs / norms


def _extrapolate(seq: list[Subspace], idx: list[int], decay: float) -> list[Subspace]:
    """Richardson step on projectors: cancels the first-order term in the radius."""
    out: list[Subspace] = list(seq[1:])
    todo = [
        a for a in range(1, len(seq))
        if idx[a] - idx[a - 1] == 1 and seq[a - 1].dim == seq[a].dim and seq[a].dim not in (0, seq[a].ambient_dim)
    ]
    if not todo:
        return out if out else list(seq)
    q = np.stack([(seq[a].projector - decay * seq[a - 1].projector) / (1 - decay) for a in todo])
    _, vecs = np.linalg.eigh(0.5 * (q + q.transpose(0, 2, 1)))
    for a, v in zip(todo, vecs):
        dim = seq[a].dim
        basis = v[:, ::-1][:, :dim]
        out[a - 1] = Subspace(seq[a].ambient_dim, grassmann._canonical_signs(basis.copy()))
    return out


def ray_sequences(F: FoliationModule, x: ArrayLike, cfg: FiberConfig):
    """Per-ray kernel sequences (after regularity filtering and extrapolation).

    Returns ``(directions, sequences, raw_points)`` where ``sequences[r]`` is a
    list of Subspace (possibly empty when no sample point passed the filter).
    """
    x = np.asarray(x, dtype=float).reshape(F.n)
    dirs = _fiber_directions(F.n, cfg)
    R, S = dirs.shape[0], cfg.steps
    radii = cfg.r0 * cfg.decay ** np.arange(1, S + 1)
    pts = x[None, None, :] + radii[None, :, None] * dirs[:, None, :]  # (R, S, n)
    flat = pts.reshape(R * S, F.n)
    kernels = kernels_batch(F, flat, cfg.tol)

    if cfg.regular_only:
        m = cfg.regular_samples
        probe = np.empty((R * S, m + 1, F.n))
        for r in range(R):
            rng = np.random.default_rng([cfg.seed, r])
            for s in range(S):
                c = pts[r, s]
                probe[r * S + s, 0] = c
                probe[r * S + s, 1:] = sample_ball(rng, c, cfg.regular_radius * radii[s], m)
        ranks = batch_ranks(F.scaled_eval_batch(probe.reshape(-1, F.n)), cfg.tol).reshape(R * S, m + 1)
        regular = np.all(ranks == ranks[:, :1], axis=1)
    else:
        regular = np.ones(R * S, dtype=bool)

    sequences = []
    for r in range(R):
        idx = [s for s in range(S) if regular[r * S + s]]
        seq = [kernels[r * S + s] for s in idx]
        if cfg.extrapolate and len(seq) >= 2:
            seq = _extrapolate(seq, idx, cfg.decay)
        sequences.append(seq)
    return dirs, sequences, pts


def blowup_fiber(F: FoliationModule, x: ArrayLike, cfg: FiberConfig | None = None) -> BlowupFiberReport:
    """Sampled blow-up fiber at x."""
    cfg = cfg or FiberConfig()
    x = np.asarray(x, dtype=float).reshape(F.n)
    dirs, sequences, _ = ray_sequences(F, x, cfg)
    usable = [i for i, seq in enumerate(sequences) if seq]
    if not usable:
        if cfg.regular_only:
            raise NoRegularApproach(f"no regular sample point on any of {len(dirs)} rays towards {x.tolist()}")
        raise InvalidInput("no sample points")
    lc = grassmann.limit_cluster([sequences[i] for i in usable], cfg.conv_tol, cfg.cluster_tol)

    records = []
    first_ray: dict[int, int] = {}
    pos = {ray: j for j, ray in enumerate(usable)}
    for i in range(len(dirs)):
        if i in pos:
            j = pos[i]
            label = lc.labels[j]
            records.append(RayRecord(dirs[i], len(sequences[i]), lc.limits[j], label))
            if label is not None and label not in first_ray:
                first_ray[label] = i
        else:
            records.append(RayRecord(dirs[i], 0, None, None))
    clusters = [BlowupPoint(x, rep, dirs[first_ray[c]]) for c, rep in enumerate(lc.clusters)]
    report = BlowupFiberReport(
        base=x,
        clusters=clusters,
        rays_sampled=len(dirs),
        non_convergent_rays=len(lc.non_convergent),
        skipped_rays=len(dirs) - len(usable),
        rays=records,
        config=cfg,
    )
    if lc.non_convergent:
        log.info("%d rays towards %s did not converge", len(lc.non_convergent), x.tolist())
    return report


def verify_fiber_properties(
    F: FoliationModule,
    x: ArrayLike,
    report: BlowupFiberReport,
    tol: float = 1e-6,
    seed: int = 0,
) -> FiberProperties:
    """Check V inside the isotropy and closure of V under the induced bracket."""
    h = isotropy(F, x)
    sf = structure_functions_at(F, x, seed=seed)
    containment = all(grassmann.contains(h, V, tol) for V in report.subspaces)
    resid = 0.0
    for V in report.subspaces:
        if V.dim == 0:
            continue
        b = V.basis
        prods = np.einsum("ia,jb,ijl->abl", b, b, sf.f)  # (dim, dim, k)
        off = prods - np.einsum("abl,lm,km->abk", prods, b, b)
        resid = max(resid, float(np.linalg.norm(off, axis=2).max()))
    props = FiberProperties(bool(containment), resid)
    report.property_report = props
    return props


def algebroid_fiber(F: FoliationModule, p: BlowupPoint) -> Subspace:
    """Complement model of F_x / V inside R^k."""
    if p.subspace.ambient_dim != F.k:
        raise InvalidInput("blow-up point is not in this module's generator coordinates")
    return grassmann.annihilator(p.subspace)


def characteristic_set(F: FoliationModule, x: ArrayLike, report: BlowupFiberReport) -> list[Subspace]:
    """Annihilators of the fiber clusters, subspaces of (R^k)*."""
    return [grassmann.annihilator(V) for V in report.subspaces]


def characteristic_ray_distances(F: FoliationModule, x: ArrayLike, report: BlowupFiberReport) -> list[NDArray]:
    """Per converged ray: Hausdorff distance from the annihilator of each ray kernel
    to the computed characteristic set, along the ray (closest points last)."""
    cfg = replace(report.config, extrapolate=False)
    dirs, seqs, _ = ray_sequences(F, x, cfg.with_directions([r.direction for r in report.rays]))
    target = characteristic_set(F, x, report)
    out = []
    for rec, seq in zip(report.rays, seqs):
        if rec.label is None or not seq:
            continue
        out.append(np.array([grassmann.hausdorff([grassmann.annihilator(v)], target) for v in seq]))
    return out


@dataclass
class FunctorialityResult:
    ok: bool
    base_clusters: int
    pullback_clusters: int
    max_mismatch: float
    non_convergent: int


def functoriality_check(
    F: FoliationModule,
    x: ArrayLike,
    m: int = 1,
    tol: float = 1e-6,
    cfg: FiberConfig | None = None,
) -> FunctorialityResult:
    """Compare the fiber of the pulled-back module at (x, 0) with the fiber at x.

    Pullback kernels are pushed down by dropping the m auxiliary generator
    coordinates. The base fiber is sampled along the projections of the
    pullback rays so that both computations see the same approach directions.
    """
    cfg = cfg or FiberConfig()
    x = np.asarray(x, dtype=float).reshape(F.n)
    G = pullback_foliation(F, m)
    rng = np.random.default_rng([cfg.seed, 7919])
    if cfg.directions is not None:
        up = np.asarray(cfg.directions, dtype=float)
        up = np.hstack([up, 0.1 * rng.standard_normal((up.shape[0], m))])
    else:
        up = rng.standard_normal((cfg.rays, F.n + m))
        up[:, : F.n] = ray_directions(F.n, cfg.rays, rng) * (1 + rng.random((cfg.rays, 1)))
    base_dirs = up[:, : F.n]
    keep = np.linalg.norm(base_dirs, axis=1) > 1e-3
    up, base_dirs = up[keep], base_dirs[keep]

    top_report = blowup_fiber(G, np.concatenate([x, np.zeros(m)]), replace(cfg, directions=None).with_directions(up))
    base_report = blowup_fiber(F, x, replace(cfg, directions=None).with_directions(base_dirs))
    pushed = [grassmann.project_coordinates(V, F.k) for V in top_report.subspaces]
    # also require the auxiliary part to vanish: V must be W (+) 0
    aux_ok = all(np.linalg.norm(V.basis[F.k:]) <= tol for V in top_report.subspaces)

    def worst(a: Sequence[Subspace], b: Sequence[Subspace]) -> float:
        return max(
            (min((grassmann.distance(u, v) if u.dim == v.dim else np.inf for v in b), default=np.inf) for u in a),
            default=0.0,
        )

    mismatch = max(worst(pushed, base_report.subspaces), worst(base_report.subspaces, pushed))
    return FunctorialityResult(
        ok=bool(aux_ok and mismatch <= tol),
        base_clusters=len(base_report.clusters),
        pullback_clusters=len(top_report.clusters),
        max_mismatch=float(mismatch),
        non_convergent=base_report.non_convergent_rays + top_report.non_convergent_rays,
    )
