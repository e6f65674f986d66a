"""
Tolerance-aware subspace arithmetic.

A point of the Grassmannian is stored as an orthonormal basis. Comparisons go
through orthogonal projectors, so the choice of basis never matters:
``distance(V, W) = ||P_V - P_W||_F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, InvalidInput

DEFAULT_TOL = 1e-8
_ORTHO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^d given by a d x m matrix with orthonormal columns."""

    ambient_dim: int
    basis: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float, copy=True)
        if basis.size == 0:
            basis = np.zeros((self.ambient_dim, 0))
        if basis.ndim != 2 or basis.shape[0] != self.ambient_dim:
            raise DimensionMismatch(
                f"basis shape {basis.shape} incompatible with ambient dimension {self.ambient_dim}"
            )
        gram_err = np.linalg.norm(basis.T @ basis - np.eye(basis.shape[1]))
        if gram_err > _ORTHO_TOL * max(1, basis.shape[1]) * 10:
            raise InvalidInput(f"basis columns are not orthonormal (error {gram_err:.2e})")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> NDArray[np.float64]:
        return self.basis @ self.basis.T

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim))

    @classmethod
    def span(cls, vectors: ArrayLike, ambient_dim: int | None = None, tol: float = DEFAULT_TOL) -> "Subspace":
        """Span of the given vectors (rows or a single vector)."""
        vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
        if ambient_dim is None:
            ambient_dim = vecs.shape[1]
        if vecs.size == 0:
            return cls.zero(ambient_dim)
        return orthonormalize(vecs.T, tol)

    def to_json(self) -> dict:
        return {"ambient": self.ambient_dim, "basis": self.basis.T.tolist()}

    @classmethod
    def from_json(cls, data: dict, tol: float = DEFAULT_TOL) -> "Subspace":
        d = int(data["ambient"])
        vecs = np.asarray(data.get("basis", []), dtype=float).reshape(-1, d)
        if vecs.shape[0] == 0:
            return cls.zero(d)
        return orthonormalize(vecs.T, tol)

    def __repr__(self):
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


def _check_finite(m: NDArray) -> None:
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")


def orthonormalize(raw: ArrayLike, tol: float = DEFAULT_TOL) -> Subspace:
    """Orthonormal basis of the column span of ``raw``.

    Directions with singular value below ``tol * sigma_max`` are dropped.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    m = np.asarray(raw, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    _check_finite(m)
    d = m.shape[0]
    if m.shape[1] == 0:
        return Subspace.zero(d)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Subspace.zero(d)
    rank = int(np.sum(s > tol * s[0]))
    return Subspace(d, _canonical_signs(u[:, :rank]))


def _canonical_signs(basis: NDArray) -> NDArray:
    # fixed sign per column keeps serialized output reproducible
    if basis.shape[1] == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def kernel(m: ArrayLike, tol: float = DEFAULT_TOL, ref: float | None = None) -> Subspace:
    """Null space of ``m``: right singular vectors with singular value <= tol * sigma_max.

    ``ref`` replaces ``sigma_max`` as the reference magnitude, which is needed when
    ``m`` is known to be a small perturbation of zero. If the reference is zero the
    absolute threshold ``tol`` is used.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _check_finite(m)
    c = m.shape[1]
    if m.shape[0] == 0 or c == 0:
        return Subspace.full(c)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    scale = s[0] if ref is None else ref
    cut = tol * scale if scale > 0 else tol
    rank = int(np.sum(s > cut))
    return Subspace(c, _canonical_signs(vt[rank:].T.copy()))


def _same_ambient(v: Subspace, w: Subspace) -> None:
    if v.ambient_dim != w.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {v.ambient_dim} vs {w.ambient_dim}")


def distance(v: Subspace, w: Subspace) -> float:
    """Frobenius norm of the projector difference."""
    _same_ambient(v, w)
    return float(np.linalg.norm(v.projector - w.projector))


def contains(v: Subspace, w: Subspace, tol: float = DEFAULT_TOL) -> bool:
    """True when ``w`` lies inside ``v`` up to ``tol``."""
    _same_ambient(v, w)
    if w.dim == 0:
        return True
    resid = w.basis - v.basis @ (v.basis.T @ w.basis)
    return bool(np.linalg.norm(resid, 2) <= tol)


def annihilator(v: Subspace) -> Subspace:
    """Orthogonal complement (the annihilator under the standard pairing)."""
    d = v.ambient_dim
    if v.dim == 0:
        return Subspace.full(d)
    if v.dim == d:
        return Subspace.zero(d)
    q, _ = np.linalg.qr(np.hstack([v.basis, np.eye(d)]), mode="complete")
    comp = q[:, v.dim:]
    # remove residual overlap, then re-orthonormalize
    comp = comp - v.basis @ (v.basis.T @ comp)
    u, s, _ = np.linalg.svd(comp, full_matrices=False)
    return Subspace(d, _canonical_signs(u[:, : d - v.dim]))


def direct_sum_zero(v: Subspace, extra: int) -> Subspace:
    """Embed ``v`` in R^{d+extra} as ``v (+) 0``."""
    basis = np.vstack([v.basis, np.zeros((extra, v.dim))])
    return Subspace(v.ambient_dim + extra, basis)


def project_coordinates(v: Subspace, keep: int, tol: float = DEFAULT_TOL) -> Subspace:
    """Image of ``v`` under the coordinate projection onto the first ``keep`` coordinates."""
    return orthonormalize(v.basis[:keep], tol) if v.dim else Subspace.zero(keep)


def nearest_subspace(projector: NDArray, dim: int) -> Subspace:
    """Subspace whose projector is closest to the symmetric matrix ``projector``."""
    d = projector.shape[0]
    if dim == 0:
        return Subspace.zero(d)
    sym = 0.5 * (projector + projector.T)
    w, vecs = np.linalg.eigh(sym)
    return Subspace(d, _canonical_signs(vecs[:, np.argsort(w)[::-1][:dim]].copy()))


@dataclass
class LimitClusters:
    """Outcome of :func:`limit_cluster`.

    ``limits[i]`` is the limit of tail ``i`` or ``None`` when the tail did not
    stabilize; ``non_convergent`` lists those indices.
    """

    clusters: list[Subspace]
    limits: list[Subspace | None]
    non_convergent: list[int]
    labels: list[int | None]


def _tail_limit(seq: Sequence[Subspace], conv_tol: float, window: int) -> Subspace | None:
    if len(seq) == 1:
        return seq[0]
    w = min(window, len(seq) - 1)
    tail = seq[-(w + 1):]
    if len({s.dim for s in tail}) != 1:
        return None
    for a, b in zip(tail[:-1], tail[1:]):
        if distance(a, b) >= conv_tol:
            return None
    return seq[-1]


def _sort_key(v: Subspace):
    return (v.dim, tuple(np.round(v.projector, 12).ravel()))


def limit_cluster(
    seq: Sequence[Subspace] | Sequence[Sequence[Subspace]],
    conv_tol: float = 1e-7,
    cluster_tol: float = 1e-3,
    window: int = 3,
) -> LimitClusters:
    """Detect the limits of one or several subspace sequences and cluster them.

    ``seq`` is either one ordered sequence or a list of sequences (tails). A tail
    converges when its last ``window`` successive distances are below
    ``conv_tol`` with constant dimension. Limits closer than ``cluster_tol`` are
    merged; the representative of each cluster does not depend on the order in
    which the tails are supplied.
    """
    if conv_tol >= cluster_tol:
        raise InvalidInput("conv_tol must be smaller than cluster_tol")
    if len(seq) == 0:
        raise InvalidInput("empty sequence")
    tails: list[Sequence[Subspace]]
    tails = [seq] if isinstance(seq[0], Subspace) else list(seq)  # type: ignore[list-item]
    if any(len(t) == 0 for t in tails):
        raise InvalidInput("empty tail")
    ambient = tails[0][0].ambient_dim
    for t in tails:
        for s in t:
            if s.ambient_dim != ambient:
                raise DimensionMismatch("subspaces in a sequence must share the ambient dimension")

    limits = [_tail_limit(t, conv_tol, window) for t in tails]
    non_convergent = [i for i, lim in enumerate(limits) if lim is None]
    converged = sorted(
        (i for i, lim in enumerate(limits) if lim is not None), key=lambda i: _sort_key(limits[i])
    )
    clusters: list[Subspace] = []
    labels: list[int | None] = [None] * len(tails)
    for i in converged:
        lim = limits[i]
        for c, rep in enumerate(clusters):
            if rep.dim == lim.dim and distance(rep, lim) < cluster_tol:
                labels[i] = c
                break
        else:
            labels[i] = len(clusters)
            clusters.append(lim)
    return LimitClusters(clusters, limits, non_convergent, labels)


def hausdorff(a: Iterable[Subspace], b: Iterable[Subspace]) -> float:
    """Hausdorff distance between two finite sets of subspaces."""
    a, b = list(a), list(b)
    if not a or not b:
        return float("inf")
    d = np.array([[distance(x, y) if x.ambient_dim == y.ambient_dim else np.inf for y in b] for x in a])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
