"""Nested (multilevel) block structure: patterns within patterns.

A level-``L`` structured matrix has an outer block grid whose distinct
blocks are themselves structured, down to dense innermost ``m x n`` blocks.
The weighted tensor becomes order ``L + 2``: mode 1 and mode ``L + 2`` index
the innermost block rows/columns, and mode ``1 + t`` indexes the classes of
level ``t`` (level 1 outermost).  Lateral "slices" along a class multi-index
``(k_1, ..., k_L)`` hold the innermost block scaled by
``sqrt(eta^(1)_{k_1} * ... * eta^(L)_{k_L})``, which again makes the map an
isometry, so tensor-side truncation error equals matrix-side error exactly.

Levels are capped at 3 (tensor order 5).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import product

import numpy as np

from .blocks import BlockPattern, struct_scalars
from .decomp import TuckerRep
from .errors import PatternMismatchError, ShapeError
from .reconstruct import DENSIFY_LIMIT

__all__ = [
    "MultilevelPattern",
    "MultilevelTuckerRep",
    "MlKronTerm",
    "ml_mat_to_tensor",
    "ml_tensor_to_mat",
    "ml_kron_sum_from_tucker",
    "ml_kron_densify",
    "psf_weighted_tensor",
    "blur_operator_dense",
]

MAX_LEVELS = 3


@dataclass(frozen=True)
class MultilevelPattern:
    """A chain of block patterns, outermost first.

    ``levels[t]`` describes the block grid at depth ``t``; its block extents
    ``(m, n)`` must equal the assembled shape of the next level.  The
    innermost extents are ``levels[-1].m`` by ``levels[-1].n``.
    """

    levels: tuple[BlockPattern, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.levels) <= MAX_LEVELS:
            raise ShapeError(f"between 1 and {MAX_LEVELS} levels supported")
        for t in range(len(self.levels) - 1):
            outer, inner = self.levels[t], self.levels[t + 1]
            if (outer.m, outer.n) != inner.shape:
                raise ShapeError(
                    f"level {t + 1} block extents {(outer.m, outer.n)} != "
                    f"level {t + 2} assembled shape {inner.shape}"
                )

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def m(self) -> int:
        return self.levels[-1].m

    @property
    def n(self) -> int:
        return self.levels[-1].n

    @property
    def class_counts(self) -> tuple[int, ...]:
        return tuple(lv.p for lv in self.levels)

    @property
    def dims(self) -> tuple[int, ...]:
        """Extents of the weighted tensor: ``(m, p_1, ..., p_L, n)``."""
        return (self.m, *self.class_counts, self.n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.levels[0].shape


def ml_mat_to_tensor(a: np.ndarray, mlp: MultilevelPattern, tol: float = 0.0) -> np.ndarray:
    """Extract the order-``L+2`` weighted tensor of a conforming matrix.

    Descends the level chain: at each level the representative sub-block of
    every class is pulled from its first placement, all other placements are
    verified against it (within ``tol``), and uncovered cells must be zero.

    Raises:
        PatternMismatchError: On any disagreement at any level.
    """
    if a.shape != mlp.shape:
        raise ShapeError(f"matrix shape {a.shape} != pattern shape {mlp.shape}")
    out = np.zeros(mlp.dims)

    def descend(block: np.ndarray, level: int, prefix: tuple[int, ...], weight: float) -> None:
        if level == mlp.depth:
            out[(slice(None), *prefix, slice(None))] = weight * block
            return
        pat = mlp.levels[level]
        bm, bn = pat.m, pat.n
        covered = np.zeros((pat.ell, pat.q), dtype=bool)
        for k, cells in enumerate(pat.placements):
            i0, j0 = cells[0]
            rep = block[i0 * bm : (i0 + 1) * bm, j0 * bn : (j0 + 1) * bn]
            for i, j in cells:
                covered[i, j] = True
                sub = block[i * bm : (i + 1) * bm, j * bn : (j + 1) * bn]
                if np.max(np.abs(sub - rep)) > tol:
                    raise PatternMismatchError(
                        f"level {level + 1}, class {k + 1}: block at "
                        f"({i + 1}, {j + 1}) differs from its representative"
                    )
            descend(rep, level + 1, prefix + (k,), weight * np.sqrt(len(cells)))
        for i, j in np.argwhere(~covered):
            sub = block[i * bm : (i + 1) * bm, j * bn : (j + 1) * bn]
            if np.max(np.abs(sub)) > tol:
                raise PatternMismatchError(
                    f"level {level + 1}: uncovered cell ({i + 1}, {j + 1}) is not zero"
                )

    descend(a, 0, (), 1.0)
    return out


def ml_tensor_to_mat(t: np.ndarray, mlp: MultilevelPattern) -> np.ndarray:
    """Assemble the matrix ``sum E^(1) (x) ... (x) E^(L) (x) slice``; exact
    inverse of :func:`ml_mat_to_tensor` on its image."""
    if t.shape != mlp.dims:
        raise ShapeError(f"tensor extents {t.shape} != pattern dims {mlp.dims}")

    def assemble(level: int, prefix: tuple[int, ...]) -> np.ndarray:
        if level == mlp.depth:
            return t[(slice(None), *prefix, slice(None))]
        pat = mlp.levels[level]
        bm, bn = pat.m, pat.n
        out = np.zeros(pat.shape)
        for k, cells in enumerate(pat.placements):
            sub = assemble(level + 1, prefix + (k,)) / np.sqrt(len(cells))
            for i, j in cells:
                out[i * bm : (i + 1) * bm, j * bn : (j + 1) * bn] = sub
        return out

    return assemble(0, ())


@dataclass(frozen=True)
class MultilevelTuckerRep:
    """A level chain paired with the Tucker factorization of its weighted
    order-``L+2`` tensor."""

    pattern: MultilevelPattern
    tucker: TuckerRep

    def __post_init__(self) -> None:
        if self.tucker.dims != self.pattern.dims:
            raise ShapeError(
                f"tucker dims {self.tucker.dims} != pattern dims {self.pattern.dims}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    def terms(self) -> list[MlKronTerm]:
        return ml_kron_sum_from_tucker(self.tucker, self.pattern)

    def densify(self) -> np.ndarray:
        rows, cols = self.pattern.shape
        if rows * cols > DENSIFY_LIMIT:
            raise ShapeError(
                f"dense result would hold {rows * cols} entries (limit {DENSIFY_LIMIT})"
            )
        return ml_tensor_to_mat(self.tucker.reconstruct(), self.pattern)


@dataclass(frozen=True)
class MlKronTerm:
    """One multilevel Kronecker term ``level_mats[0] (x) ... (x) block``."""

    level_mats: tuple[np.ndarray, ...]
    block: np.ndarray

    def densify(self) -> np.ndarray:
        return reduce(np.kron, (*self.level_mats, self.block))


def ml_kron_sum_from_tucker(t: TuckerRep, mlp: MultilevelPattern) -> list[MlKronTerm]:
    """Kronecker terms of ``M[tucker]``: one term per mode-2..L+1 core index.

    Term ``(j_1, ..., j_L)`` pairs the scalar assemblies of column ``j_t`` of
    each level's mode factor with the innermost block
    ``U core[:, j_1, ..., j_L, :] W^T``.  Identity factors contribute
    one-hot columns, i.e. plain placement matrices.
    """
    if t.core.ndim != mlp.depth + 2:
        raise ShapeError(f"Tucker order {t.core.ndim} != pattern order {mlp.depth + 2}")
    if t.dims != mlp.dims:
        raise ShapeError(f"Tucker dims {t.dims} != pattern dims {mlp.dims}")
    u = t.factors[0]
    w = t.factors[-1]
    level_factors = []
    for lv, f in zip(mlp.levels, t.factors[1:-1]):
        level_factors.append(np.eye(lv.p) if f is None else f)

    terms: list[MlKronTerm] = []
    for multi in product(*(range(f.shape[1]) for f in level_factors)):
        mats = tuple(
            struct_scalars(lv, level_factors[tt][:, multi[tt]])
            for tt, lv in enumerate(mlp.levels)
        )
        core_slice = t.core[(slice(None), *multi, slice(None))]
        blk = core_slice if u is None else u @ core_slice
        blk = blk if w is None else blk @ w.T
        terms.append(MlKronTerm(level_mats=mats, block=blk))
    return terms


def ml_kron_densify(terms: list[MlKronTerm]) -> np.ndarray:
    """Sum the dense Kronecker products of the terms (size-guarded)."""
    if not terms:
        raise ShapeError("no terms to densify")
    rows = int(np.prod([m.shape[0] for m in terms[0].level_mats])) * terms[0].block.shape[0]
    cols = int(np.prod([m.shape[1] for m in terms[0].level_mats])) * terms[0].block.shape[1]
    if rows * cols > DENSIFY_LIMIT:
        raise ShapeError(f"dense result would hold {rows * cols} entries (limit {DENSIFY_LIMIT})")
    out = np.zeros((rows, cols))
    for term in terms:
        out += term.densify()
    return out


# ---------------------------------------------------------------------------
# point-spread-function blur operators (3-level banded Toeplitz)
# ---------------------------------------------------------------------------


def _kernel_level_pattern(k: int, bm: int, bn: int) -> BlockPattern:
    """Banded Toeplitz level with classes in kernel order.

    Class ``i`` (0-based) sits on the grid diagonal ``col - row = h - i``
    with ``h = (k - 1) // 2``, so class index equals kernel index and the
    center tap lands on the main diagonal.  ``eta_i = k - |i - h|``.
    """
    h = (k - 1) // 2
    cells = []
    for i in range(k):
        offset = h - i
        if offset >= 0:
            rows = np.arange(k - offset)
            cells.append(np.column_stack([rows, rows + offset]))
        else:
            rows = np.arange(-offset, k)
            cells.append(np.column_stack([rows, rows + offset]))
    return BlockPattern(ell=k, q=k, m=bm, n=bn, placements=tuple(cells),
                        structure_class=f"toeplitz:{h}")


def psf_weighted_tensor(psf: np.ndarray) -> tuple[np.ndarray, MultilevelPattern]:
    """Weighted order-5 tensor of the 3-D blur operator of ``psf``.

    For an odd ``K`` and a ``K x K x K`` point-spread function, the blur
    operator with zero (Dirichlet) boundary is a 3-level banded-Toeplitz
    matrix of bandwidth ``(K-1)/2`` per level whose innermost 1 x 1 block at
    class multi-index ``(i1, i2, i3)`` is ``psf[i3, i2, i1]`` -- the first
    and third kernel axes swap because the first image axis varies fastest
    in the vectorization.  The tensor entry carries the weight
    ``sqrt(eta_{i1} * eta_{i2} * eta_{i3})`` with ``eta_i = K - |i - h|``.

    Returns:
        ``(tensor, pattern)`` with tensor extents ``(1, K, K, K, 1)``.
    """
    psf = np.asarray(psf, dtype=np.float64)
    if psf.ndim != 3 or len(set(psf.shape)) != 1:
        raise ShapeError("psf must be a K x K x K cube")
    k = psf.shape[0]
    if k % 2 == 0:
        raise ShapeError("psf extent K must be odd")
    h = (k - 1) // 2
    eta = k - np.abs(np.arange(k) - h)

    lv3 = _kernel_level_pattern(k, 1, 1)
    lv2 = _kernel_level_pattern(k, k, k)
    lv1 = _kernel_level_pattern(k, k * k, k * k)
    mlp = MultilevelPattern(levels=(lv1, lv2, lv3))

    weights = np.sqrt(np.einsum("a,b,c->abc", eta, eta, eta))
    tensor = (weights * np.transpose(psf, (2, 1, 0)))[None, :, :, :, None]
    return np.ascontiguousarray(tensor), mlp


def blur_operator_dense(psf: np.ndarray) -> np.ndarray:
    """Dense ``K^3 x K^3`` blur operator of ``psf`` on a ``K^3`` image with
    zero boundary, vectorized first image axis fastest.  Capped at ``K <= 7``
    (it exists to cross-check the structured path on small cases):
    ``A[(a1,a2,a3),(b1,b2,b3)] = psf[h+a1-b1, h+a2-b2, h+a3-b3]``.
    """
    psf = np.asarray(psf, dtype=np.float64)
    if psf.ndim != 3 or len(set(psf.shape)) != 1:
        raise ShapeError("psf must be a K x K x K cube")
    k = psf.shape[0]
    if k % 2 == 0:
        raise ShapeError("psf extent K must be odd")
    if k > 7:
        raise ShapeError("dense blur operator capped at K <= 7")
    h = (k - 1) // 2
    size = k**3
    out = np.zeros((size, size))
    idx = [(a1, a2, a3) for a3 in range(k) for a2 in range(k) for a1 in range(k)]
    for row, (a1, a2, a3) in enumerate(idx):
        for col, (b1, b2, b3) in enumerate(idx):
            d1, d2, d3 = a1 - b1, a2 - b2, a3 - b3
            if max(abs(d1), abs(d2), abs(d3)) <= h:
                out[row, col] = psf[h + d1, h + d2, h + d3]
    return out
