"""Symmetry-aware compression that preserves (semi)definiteness.

Two constructions for symmetric block matrices whose pattern is
*transpose-closed* (every class is either symmetric-supported with a
symmetric block, or mirrored exactly by the class holding the transposed
block):

* :func:`spsd_compress` shares one orthonormal basis ``U`` between tensor
  modes 1 and 3 (legitimate because transpose-closure makes the two
  unfoldings span the same subspace), which reproduces the two-sided
  projection ``(I (x) UU^T) A (I (x) UU^T)`` -- symmetric always, and
  positive semidefinite whenever ``A`` is.

* :func:`spd_compress` peels off the block-diagonal anchor ``I (x) T0``,
  scales the remainder by the anchor's Cholesky factor, compresses it with
  the shared-basis projection, and reassembles
  ``(I (x) L)(I + M)(I (x) L^T)``.  The result is provably SPD: the
  quadratic form splits into ``||x2||^2 + x1^T (I + A) x1`` over the
  projected/unprojected parts, and ``I + A`` is congruent to the original
  SPD matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .blocks import (
    BlockPattern,
    classify_placements,
    extract_blocks,
    struct_assemble,
)
from .decomp import _mode_basis, cholesky
from .errors import PatternMismatchError, ShapeError
from .reconstruct import DENSIFY_LIMIT, BlockLowRankRep
from .tensor import unfold

__all__ = [
    "SpsdRep",
    "SpdRep",
    "check_transpose_closed",
    "spsd_compress",
    "spsd_compress_blocks",
    "spd_compress",
]


@dataclass(frozen=True)
class SpsdRep:
    """Shared-basis projection of a symmetric block matrix.

    Attributes:
        pattern: The (square, transpose-closed) source pattern.
        basis: ``n x r`` shared orthonormal basis ``U``.
        blocks: ``(p, r, r)`` projected distinct blocks ``U^T A_k U``.
    """

    pattern: BlockPattern
    basis: np.ndarray
    blocks: np.ndarray

    def __post_init__(self) -> None:
        n, r = self.basis.shape
        if self.pattern.m != n or self.pattern.n != n:
            raise ShapeError("basis rows must equal the square block extent")
        if self.blocks.shape != (self.pattern.p, r, r):
            raise ShapeError(f"blocks shape {self.blocks.shape} != ({self.pattern.p}, {r}, {r})")

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    def as_blr(self) -> BlockLowRankRep:
        """The same operator as a block-low-rank representation."""
        eta = np.sqrt(np.array(self.pattern.counts, dtype=np.float64))
        return BlockLowRankRep(
            pattern=self.pattern,
            left=self.basis.copy(),
            right=self.basis.copy(),
            middles=self.blocks * eta[:, None, None],
        )

    def densify(self) -> np.ndarray:
        total = self.pattern.shape[0] * self.pattern.shape[1]
        if total > DENSIFY_LIMIT:
            raise ShapeError(f"dense result would hold {total} entries (limit {DENSIFY_LIMIT})")
        u = self.basis
        return struct_assemble(self.pattern, [u @ b @ u.T for b in self.blocks])

    def trace(self) -> float:
        """Trace of the represented matrix, computed without densifying."""
        total = 0.0
        for k, cells in enumerate(self.pattern.placements):
            diag_cells = int(np.sum(cells[:, 0] == cells[:, 1]))
            if diag_cells:
                total += diag_cells * float(np.trace(self.blocks[k]))
        return total


@dataclass(frozen=True)
class SpdRep:
    """SPD-preserving compression ``(I (x) chol)(I + M)(I (x) chol^T)``.

    ``M`` is the shared-basis projection (an :class:`SpsdRep` over the
    scaled remainder pattern, which may have zero classes when the input is
    exactly block diagonal).
    """

    chol: np.ndarray
    remainder: SpsdRep
    ell: int

    @property
    def rank(self) -> int:
        return self.remainder.rank

    @property
    def shape(self) -> tuple[int, int]:
        n = self.chol.shape[0] * self.ell
        return (n, n)

    def densify(self) -> np.ndarray:
        n = self.chol.shape[0]
        total = (self.ell * n) ** 2
        if total > DENSIFY_LIMIT:
            raise ShapeError(f"dense result would hold {total} entries (limit {DENSIFY_LIMIT})")
        inner = np.eye(self.ell * n)
        if self.remainder.pattern.p:
            inner = inner + self.remainder.densify()
        lfull = np.kron(np.eye(self.ell), self.chol)
        return lfull @ inner @ lfull.T


def check_transpose_closed(pattern: BlockPattern, blocks, tol: float = 0.0) -> None:
    """Verify that transposing the matrix permutes the classes.

    For every class ``k``, the transposed support must be the support of
    some class ``j`` (possibly ``k`` itself) whose block equals ``A_k^T``
    within ``tol``.

    Raises:
        PatternMismatchError: If any class has no transpose partner.
    """
    supports = [frozenset((int(i), int(j)) for i, j in cells) for cells in pattern.placements]
    index = {s: k for k, s in enumerate(supports)}
    for k, s in enumerate(supports):
        mirrored = frozenset((j, i) for i, j in s)
        partner = index.get(mirrored)
        if partner is None:
            raise PatternMismatchError(f"class {k + 1}: transposed support matches no class")
        if np.max(np.abs(np.asarray(blocks[partner]) - np.asarray(blocks[k]).T)) > tol:
            raise PatternMismatchError(
                f"class {k + 1}: block transpose differs from class {partner + 1}"
            )


def _shared_basis_rep(pattern: BlockPattern, blocks, r: int) -> SpsdRep:
    """Mode-1 basis of the weighted tensor, shared with mode 3."""
    n = pattern.m
    if not 1 <= r <= n:
        raise ShapeError(f"rank {r} out of range for block extent {n}")
    if pattern.p == 0:
        return SpsdRep(pattern=pattern, basis=np.eye(n)[:, :r],
                       blocks=np.zeros((0, r, r)))
    t = np.zeros((n, pattern.p, n))
    for k, blk in enumerate(blocks):
        t[:, k, :] = np.sqrt(pattern.counts[k]) * blk
    u = _mode_basis(unfold(t, 1), r)
    proj = np.stack([u.T @ blk @ u for blk in blocks])
    return SpsdRep(pattern=pattern, basis=u, blocks=proj)


def spsd_compress_blocks(pattern: BlockPattern, blocks, r: int, tol: float = 1e-12) -> SpsdRep:
    """:func:`spsd_compress` starting from the distinct blocks directly,
    for matrices too large to assemble densely."""
    if pattern.ell != pattern.q or pattern.m != pattern.n:
        raise ShapeError("shared-basis compression needs a square grid of square blocks")
    scale = max(float(np.max(np.abs(b))) for b in blocks) if len(blocks) else 1.0
    check_transpose_closed(pattern, blocks, tol=tol * max(scale, 1.0))
    return _shared_basis_rep(pattern, blocks, r)


def spsd_compress(a: np.ndarray, pattern: BlockPattern, r: int) -> SpsdRep:
    """Compress a symmetric block matrix with one basis on both sides.

    Args:
        a: Symmetric matrix conforming to ``pattern`` (square grid, square
            blocks, transpose-closed classes).
        r: Shared basis rank, ``1 <= r <= n``.

    Returns:
        :class:`SpsdRep` representing ``(I (x) UU^T) A (I (x) UU^T)``.
    """
    if a.shape[0] != a.shape[1]:
        raise ShapeError("spsd_compress expects a square matrix")
    blocks = extract_blocks(a, pattern)
    return spsd_compress_blocks(pattern, blocks, r)


def spd_compress(a: np.ndarray, pattern: BlockPattern, r: int) -> SpdRep:
    """SPD-preserving compression anchored at the leading diagonal block.

    The block at grid cell (1, 1) is taken as the anchor ``T0`` (it must be
    SPD -- its failed Cholesky is the error signal).  Classes are split into
    diagonal/off-diagonal parts, the anchor is subtracted on the diagonal,
    the remainder blocks are scaled to ``L^-1 B L^-T``, and the scaled
    remainder is compressed with the shared-basis projection at rank ``r``.

    Returns:
        :class:`SpdRep`; its ``densify()`` is SPD for every ``1 <= r <= n``.

    Raises:
        NotPositiveDefiniteError: If the anchor block is not SPD.
        PatternMismatchError: If cell (1, 1) belongs to no class or the
            remainder is not transpose-closed.
    """
    if a.shape[0] != a.shape[1]:
        raise ShapeError("spd_compress expects a square matrix")
    if pattern.ell != pattern.q or pattern.m != pattern.n:
        raise ShapeError("spd_compress needs a square grid of square blocks")
    blocks = extract_blocks(a, pattern)

    anchor = None
    for k, cells in enumerate(pattern.placements):
        if any(i == 0 and j == 0 for i, j in cells):
            anchor = blocks[k]
            break
    if anchor is None:
        raise PatternMismatchError("grid cell (1, 1) belongs to no class; no anchor block")
    low = cholesky(anchor)

    # split every class into its diagonal and off-diagonal cells, subtract
    # the anchor on the diagonal, drop exactly-zero remainders
    rem_cells: list[np.ndarray] = []
    rem_blocks: list[np.ndarray] = []
    for k, cells in enumerate(pattern.placements):
        on_diag = cells[:, 0] == cells[:, 1]
        for mask, shift in ((on_diag, anchor), (~on_diag, None)):
            if not mask.any():
                continue
            blk = blocks[k] - shift if shift is not None else blocks[k]
            if not blk.any():
                continue
            rem_cells.append(cells[mask])
            rem_blocks.append(blk)

    scaled = []
    for blk in rem_blocks:
        half = solve_triangular(low, blk, lower=True)
        scaled.append(solve_triangular(low, half.T, lower=True).T)

    if rem_cells:
        rem_pattern = BlockPattern(
            ell=pattern.ell, q=pattern.q, m=pattern.m, n=pattern.n,
            placements=tuple(rem_cells),
            structure_class=classify_placements(tuple(rem_cells), pattern.ell, pattern.q),
        )
    else:
        rem_pattern = BlockPattern(
            ell=pattern.ell, q=pattern.q, m=pattern.m, n=pattern.n,
            placements=(), structure_class="general",
        )
    rep = spsd_compress_blocks(rem_pattern, tuple(scaled), r)
    return SpdRep(chol=low, remainder=rep, ell=pattern.ell)
