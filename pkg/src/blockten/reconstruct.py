"""Structured matrix representations recovered from tensor factorizations.

Two output formats, both of which keep the block structure of the source
pattern without ever materializing Kronecker products:

* :class:`KronSumRep` -- a sum ``sum_j C_j (x) D_j`` where each ``C_j`` is a
  sparse scalar assembly over the pattern's placements (support inside the
  union of the ``E_k`` supports) and each ``D_j`` is a dense ``m x n`` term.
* :class:`BlockLowRankRep` -- ``(I (x) L) S (I (x) R^T)`` with thin
  orthonormal-ish side bases ``L``, ``R`` and a block-sparse middle ``S``
  holding one small block per class.

Matrix-vector products use ``(C (x) D) vec(X) = vec(D X C^T)`` blockwise and
optionally tally multiply-add counts into a :class:`FlopCounter`, which is
how the linear-in-rank cost claim is checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .blocks import BlockPattern, struct_expand, struct_scalars
from .decomp import KruskalRep, TuckerRep, qr_thin
from .errors import ShapeError
from .tensor import fro_norm

__all__ = [
    "KronSumRep",
    "BlockLowRankRep",
    "TuckerBlockRep",
    "FlopCounter",
    "kron_sum_from_tucker",
    "kron_sum_from_kruskal",
    "blr_from_tucker",
    "blr_from_kruskal",
    "matvec",
    "densify",
    "error_fro",
    "DENSIFY_LIMIT",
]

DENSIFY_LIMIT = 10**8  # refuse to build dense matrices beyond this many entries


class FlopCounter:
    """Accumulates multiply-add counts reported by :func:`matvec`."""

    def __init__(self) -> None:
        self.flops = 0

    def add(self, n: float) -> None:
        self.flops += int(n)


@dataclass(frozen=True)
class KronSumRep:
    """``sum_j C_j (x) terms[j]`` with ``C_j = sum_k coeffs[k, j] E_k``.

    Attributes:
        pattern: Block pattern supplying the placement matrices ``E_k``.
        coeffs: ``(p, r)`` array; column ``j`` gives the per-class scalars
            of ``C_j`` (the ``1/sqrt(eta_k)`` normalization stays inside
            ``E_k``).
        terms: ``(r, m, n)`` stack of the dense Kronecker partners ``D_j``.
    """

    pattern: BlockPattern
    coeffs: np.ndarray
    terms: np.ndarray

    def __post_init__(self) -> None:
        p, r = self.coeffs.shape
        if p != self.pattern.p:
            raise ShapeError(f"coeffs rows {p} != number of classes {self.pattern.p}")
        if self.terms.shape != (r, self.pattern.m, self.pattern.n):
            raise ShapeError(
                f"terms shape {self.terms.shape} != ({r}, {self.pattern.m}, {self.pattern.n})"
            )

    @property
    def n_terms(self) -> int:
        return self.coeffs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    def c_matrix(self, j: int) -> sp.csr_matrix:
        """Sparse ``C_j`` (0-based term index)."""
        pat = self.pattern
        rows, cols, data = [], [], []
        for k, cells in enumerate(pat.placements):
            rows.extend(cells[:, 0])
            cols.extend(cells[:, 1])
            data.extend([self.coeffs[k, j] / np.sqrt(len(cells))] * len(cells))
        return sp.csr_matrix((data, (rows, cols)), shape=(pat.ell, pat.q))


@dataclass(frozen=True)
class BlockLowRankRep:
    """``(I (x) left) S (I (x) right^T)`` with a block-sparse middle ``S``.

    ``middles[k]`` is the small block placed (scaled by ``1/sqrt(eta_k)``)
    on every cell of class ``k``; equivalently ``S = sum_k E_k (x)
    middles[k]``.  ``left`` is ``m x r_left``, ``right`` is ``n x r_right``,
    and each middle is ``r_left x r_right``.
    """

    pattern: BlockPattern
    left: np.ndarray
    right: np.ndarray
    middles: np.ndarray

    def __post_init__(self) -> None:
        rl, rr = self.left.shape[1], self.right.shape[1]
        if self.left.shape[0] != self.pattern.m or self.right.shape[0] != self.pattern.n:
            raise ShapeError("side bases do not match the pattern's block extents")
        if self.middles.shape != (self.pattern.p, rl, rr):
            raise ShapeError(
                f"middles shape {self.middles.shape} != ({self.pattern.p}, {rl}, {rr})"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape


@dataclass(frozen=True)
class TuckerBlockRep:
    """A block pattern paired with the raw Tucker factorization of its
    weighted tensor -- the archival form from which either output format
    can be derived."""

    pattern: BlockPattern
    tucker: TuckerRep

    def __post_init__(self) -> None:
        pat = self.pattern
        if self.tucker.dims != (pat.m, pat.p, pat.n):
            raise ShapeError(
                f"tucker dims {self.tucker.dims} != pattern dims {(pat.m, pat.p, pat.n)}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    def to_kron_sum(self) -> KronSumRep:
        return kron_sum_from_tucker(self.tucker, self.pattern)


# ---------------------------------------------------------------------------
# converters out of the tensor formats
# ---------------------------------------------------------------------------


def _tucker_side(t: TuckerRep, pattern: BlockPattern) -> tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None]:
    if t.core.ndim != 3:
        raise ShapeError("expected an order-3 Tucker representation")
    if t.dims != (pattern.m, pattern.p, pattern.n):
        raise ShapeError(
            f"Tucker dims {t.dims} do not match pattern ({pattern.m}, {pattern.p}, {pattern.n})"
        )
    return t.factors


def kron_sum_from_tucker(t: TuckerRep, pattern: BlockPattern) -> KronSumRep:
    """Kron-sum whose ``C_j`` take mode-2 factor column ``j`` as class
    scalars and whose ``D_j = U core[:, j, :] W^T`` fold in the side bases.

    The number of terms is the mode-2 rank.  With all factors identity this
    reduces to one term per class: ``C_k = E_k`` and ``D_k`` the weighted
    slice ``sqrt(eta_k) A_k``.
    """
    u, v, w = _tucker_side(t, pattern)
    coeffs = np.eye(pattern.p) if v is None else v.copy()
    r2 = t.core.shape[1]
    terms = np.empty((r2, pattern.m, pattern.n))
    for j in range(r2):
        d = t.core[:, j, :]
        if u is not None:
            d = u @ d
        if w is not None:
            d = d @ w.T
        terms[j] = d
    return KronSumRep(pattern=pattern, coeffs=coeffs, terms=terms)


def kron_sum_from_kruskal(
    k: KruskalRep,
    pattern: BlockPattern,
    split: str = "factor",
) -> KronSumRep:
    """Kron-sum from a CP factorization: one rank-1 partner per component.

    The mode-2 factor ``Y`` is split as ``Y = F G^T``; column ``j`` of ``F``
    supplies the class scalars of ``C_j`` and ``D_j = X diag(G[:, j]) Z^T``.

    Args:
        split: ``"factor"`` takes ``F = Y, G = I`` (so ``D_j`` is the rank-1
            outer product ``X[:, j] Z[:, j]^T``); ``"qr"`` takes the thin QR
            ``Y = Q R`` with ``F = Q``, giving orthonormal coefficient
            columns at the price of dense ``D_j``.
    """
    if k.dims != (pattern.m, pattern.p, pattern.n):
        raise ShapeError(
            f"CP dims {k.dims} do not match pattern ({pattern.m}, {pattern.p}, {pattern.n})"
        )
    r = k.rank
    if split == "factor":
        f = k.y
        g = np.eye(r)
    elif split == "qr":
        if k.y.shape[0] < r:
            raise ShapeError("qr split needs p >= r")
        f, ry = qr_thin(k.y)
        g = ry.T
    else:
        raise ValueError(f"unknown split {split!r}")
    terms = np.empty((r, pattern.m, pattern.n))
    for j in range(r):
        terms[j] = (k.x * g[:, j]) @ k.z.T
    return KronSumRep(pattern=pattern, coeffs=f.copy(), terms=terms)


def blr_from_tucker(t: TuckerRep, pattern: BlockPattern) -> BlockLowRankRep:
    """Block-low-rank form: side bases from modes 1 and 3, middle blocks
    ``sum_j V[k, j] core[:, j, :]`` (identity mode-2 factor means the middle
    block of class ``k`` is the core slice itself)."""
    u, v, w = _tucker_side(t, pattern)
    left = np.eye(pattern.m) if u is None else u.copy()
    right = np.eye(pattern.n) if w is None else w.copy()
    if v is None:
        middles = np.ascontiguousarray(np.moveaxis(t.core, 1, 0))
    else:
        middles = np.einsum("ajb,kj->kab", t.core, v)
    return BlockLowRankRep(pattern=pattern, left=left, right=right, middles=middles)


def blr_from_kruskal(k: KruskalRep, pattern: BlockPattern) -> BlockLowRankRep:
    """Block-low-rank form from CP: orthonormal bases from thin QR of the
    outer factors, middles ``R_x diag(Y[k, :]) R_z^T``.

    Raises:
        ShapeError: If the CP rank exceeds ``m`` or ``n`` (the QR of a wide
            factor gives no orthonormal column basis).
    """
    if k.dims != (pattern.m, pattern.p, pattern.n):
        raise ShapeError(
            f"CP dims {k.dims} do not match pattern ({pattern.m}, {pattern.p}, {pattern.n})"
        )
    r = k.rank
    if pattern.m < r or pattern.n < r:
        raise ShapeError(f"CP rank {r} exceeds a block extent ({pattern.m} x {pattern.n})")
    qx, rx = qr_thin(k.x)
    qz, rz = qr_thin(k.z)
    middles = np.empty((pattern.p, r, r))
    for kk in range(pattern.p):
        middles[kk] = (rx * k.y[kk, :]) @ rz.T
    return BlockLowRankRep(pattern=pattern, left=qx, right=qz, middles=middles)


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------


def matvec(rep: KronSumRep | BlockLowRankRep, x: np.ndarray, counter: FlopCounter | None = None) -> np.ndarray:
    """Apply the represented matrix to ``x`` without densifying.

    Args:
        rep: Either representation.
        x: Vector of length ``q * n``.
        counter: Optional; receives the multiply-add count of this product.

    Returns:
        Vector of length ``ell * m``.
    """
    pat = rep.pattern
    m, n, ell, q = pat.m, pat.n, pat.ell, pat.q
    if x.shape != (q * n,):
        raise ShapeError(f"vector length {x.shape} != {(q * n,)}")
    xmat = x.reshape((n, q), order="F")

    if isinstance(rep, KronSumRep):
        acc = np.zeros((m, ell))
        nnz = sum(pat.counts)
        for j in range(rep.n_terms):
            dx = rep.terms[j] @ xmat
            acc += (rep.c_matrix(j) @ dx.T).T
            if counter is not None:
                counter.add(2 * m * n * q + 2 * m * nnz)
        return acc.reshape(-1, order="F")

    if isinstance(rep, BlockLowRankRep):
        rl, rr = rep.left.shape[1], rep.right.shape[1]
        z = rep.right.T @ xmat
        if counter is not None:
            counter.add(2 * n * rr * q)
        yb = np.zeros((rl, ell))
        for k, cells in enumerate(pat.placements):
            s_k = rep.middles[k] / np.sqrt(len(cells))
            for i, j in cells:
                yb[:, i] += s_k @ z[:, j]
                if counter is not None:
                    counter.add(2 * rl * rr)
        y = rep.left @ yb
        if counter is not None:
            counter.add(2 * m * rl * ell)
        return y.reshape(-1, order="F")

    raise TypeError(f"unsupported representation {type(rep).__name__}")


def densify(rep: KronSumRep | BlockLowRankRep) -> np.ndarray:
    """Materialize the represented matrix (guarded against huge outputs).

    Raises:
        ShapeError: If the dense result would exceed ``DENSIFY_LIMIT``
            entries.
    """
    pat = rep.pattern
    total = pat.ell * pat.m * pat.q * pat.n
    if total > DENSIFY_LIMIT:
        raise ShapeError(f"dense result would hold {total} entries (limit {DENSIFY_LIMIT})")
    if isinstance(rep, KronSumRep):
        items = [np.tensordot(rep.coeffs[k, :], rep.terms, axes=(0, 0)) for k in range(pat.p)]
        return struct_expand(pat, items)
    if isinstance(rep, BlockLowRankRep):
        items = [rep.left @ rep.middles[k] @ rep.right.T for k in range(pat.p)]
        return struct_expand(pat, items)
    raise TypeError(f"unsupported representation {type(rep).__name__}")


def error_fro(a: np.ndarray, rep: KronSumRep | BlockLowRankRep) -> float:
    """Relative Frobenius error ``||a - densify(rep)|| / ||a||``."""
    if a.shape != rep.shape:
        raise ShapeError(f"matrix shape {a.shape} != representation shape {rep.shape}")
    base = fro_norm(a)
    if base == 0.0:
        raise ShapeError("relative error undefined for a zero matrix")
    return fro_norm(a - densify(rep)) / base


def c_term_dense(rep: KronSumRep, j: int) -> np.ndarray:
    """Dense ``C_j`` of a Kron-sum term, mainly for tests and reports."""
    return struct_scalars(rep.pattern, rep.coeffs[:, j])
