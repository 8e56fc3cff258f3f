"""Matrix and tensor factorizations used by the compression pipelines.

The matrix kernels (:func:`svd_truncated`, :func:`qr_thin`,
:func:`cholesky`) are thin wrappers over LAPACK via numpy that pin down the
conventions the rest of the package relies on: deterministic singular-vector
signs, nonnegative R diagonals, and a dedicated error type for failed
Cholesky pivots.  The tensor routines (:func:`hosvd`,
:func:`tucker_partial`, :func:`cp_als`, :func:`randomized_mode_basis`) are
implemented directly on top of the mode arithmetic in :mod:`blockten.tensor`.

Randomness: sketching matrices are drawn from ``numpy.random.default_rng``
(PCG64) via ``standard_normal`` (ziggurat sampling), so a fixed seed fixes
the basis bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import khatri_rao

from .errors import ConvergenceError, NotPositiveDefiniteError, ShapeError
from .tensor import fro_norm, mode_multiply, unfold

__all__ = [
    "TuckerRep",
    "KruskalRep",
    "CpResult",
    "SketchConfig",
    "svd_truncated",
    "qr_thin",
    "cholesky",
    "hosvd",
    "tucker_partial",
    "cp_als",
    "randomized_mode_basis",
]

_CP_FALLBACK_SEED = 0  # fixed seed for random init columns when r exceeds an extent


# ---------------------------------------------------------------------------
# representation types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TuckerRep:
    """Tucker format: ``core`` contracted with one factor per mode.

    ``factors[k]`` is either an ``(extent_k, rank_k)`` matrix with
    orthonormal columns or ``None``, which stands for the identity (the mode
    was left uncompressed and ``core`` keeps its full extent there).
    """

    core: np.ndarray
    factors: tuple[np.ndarray | None, ...]

    def __post_init__(self) -> None:
        if self.core.ndim != len(self.factors):
            raise ShapeError(
                f"core order {self.core.ndim} does not match {len(self.factors)} factors"
            )
        for k, f in enumerate(self.factors):
            if f is not None and f.shape[1] != self.core.shape[k]:
                raise ShapeError(f"factor for mode {k + 1} has {f.shape[1]} columns, "
                                 f"core extent is {self.core.shape[k]}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(
            self.core.shape[k] if f is None else f.shape[0]
            for k, f in enumerate(self.factors)
        )

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def reconstruct(self) -> np.ndarray:
        """Expand back to a dense tensor."""
        out = self.core
        for k, f in enumerate(self.factors):
            if f is not None:
                out = mode_multiply(out, k + 1, f)
        return out


@dataclass(frozen=True)
class KruskalRep:
    """Rank-``r`` CP format for an order-3 tensor.

    Entry ``(i, j, k)`` equals ``sum_r X[i, r] * Y[j, r] * Z[k, r]``;
    equivalently lateral slice ``j`` is ``X @ diag(Y[j, :]) @ Z.T``.
    Component weights are absorbed into ``x``.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        r = self.x.shape[1]
        if self.y.shape[1] != r or self.z.shape[1] != r:
            raise ShapeError("CP factors must share the same number of columns")

    @property
    def rank(self) -> int:
        return self.x.shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.x.shape[0], self.y.shape[0], self.z.shape[0])

    def reconstruct(self) -> np.ndarray:
        return np.einsum("ir,jr,kr->ijk", self.x, self.y, self.z)


@dataclass(frozen=True)
class CpResult:
    """Outcome of :func:`cp_als`: the factorization plus its fit trace."""

    rep: KruskalRep
    fit: float
    fit_history: tuple[float, ...]
    n_iters: int
    converged: bool


@dataclass(frozen=True)
class SketchConfig:
    """Sketch sizes and seed for :func:`randomized_mode_basis`.

    ``sizes[k-1]`` is the Gaussian sketch size applied to mode ``k``;
    ``None`` leaves that mode untouched (identity sketch).  The target mode
    of the basis computation must be ``None``.
    """

    seed: int
    sizes: tuple[int | None, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# matrix kernels
# ---------------------------------------------------------------------------


def svd_truncated(a: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-``r`` truncated SVD with deterministic singular-vector signs.

    Args:
        a: Matrix.
        r: Number of singular triplets to keep, ``1 <= r <= min(a.shape)``.

    Returns:
        ``(u, s, v)`` with ``u`` of shape ``(m, r)``, ``s`` the ``r`` leading
        singular values (nonincreasing), ``v`` of shape ``(n, r)``, so that
        ``u @ diag(s) @ v.T`` is the best rank-``r`` approximation.  Each
        column of ``u`` has its largest-magnitude entry positive, with the
        sign flip compensated in ``v``.

    Raises:
        ShapeError: If ``r`` is out of range.
        ConvergenceError: If the underlying LAPACK iteration fails.
    """
    if a.ndim != 2:
        raise ShapeError("svd_truncated expects a matrix")
    if not 1 <= r <= min(a.shape):
        raise ShapeError(f"rank {r} out of range for shape {a.shape}")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hardware dependent
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    u, vt = u[:, :r], vt[:r, :]
    lead = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[lead, np.arange(r)])
    signs[signs == 0] = 1.0
    return u * signs, s[:r].copy(), (vt * signs[:, None]).T


def qr_thin(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with nonnegative R diagonal.

    Requires ``a.shape[0] >= a.shape[1]`` so that ``q`` has orthonormal
    columns spanning ``range(a)``.
    """
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ShapeError(f"qr_thin expects a tall or square matrix, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, r * signs[:, None]


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix.

    Raises:
        ShapeError: If ``a`` is not square-symmetric.
        NotPositiveDefiniteError: If a pivot is non-positive.  This error
            doubles as the package's SPD test.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("cholesky expects a square matrix")
    scale = np.max(np.abs(a)) or 1.0
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ShapeError("cholesky expects a symmetric matrix")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Tucker
# ---------------------------------------------------------------------------


def _mode_basis(mat: np.ndarray, r: int) -> np.ndarray:
    """Leading ``r`` left singular vectors, orthonormally completed when the
    unfolding has fewer columns than ``r`` (possible for wide-thin modes)."""
    if r <= min(mat.shape):
        u, _, _ = svd_truncated(mat, r)
        return u
    try:
        u, _, _ = np.linalg.svd(mat, full_matrices=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hardware dependent
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    u = u[:, :r]
    lead = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[lead, np.arange(r)])
    signs[signs == 0] = 1.0
    return u * signs


def hosvd(t: np.ndarray, ranks: tuple[int, ...] | list[int]) -> TuckerRep:
    """Higher-order SVD: per-mode truncated bases plus the projected core.

    Args:
        t: Tensor of any order >= 2.
        ranks: Target multilinear rank, one entry per mode with
            ``1 <= ranks[k] <= t.shape[k]``.

    Returns:
        :class:`TuckerRep` whose factor for mode ``k`` holds the ``ranks[k]``
        leading left singular vectors of the mode-``k`` unfolding of ``t``.
    """
    if len(ranks) != t.ndim:
        raise ShapeError(f"expected {t.ndim} ranks, got {len(ranks)}")
    factors: list[np.ndarray | None] = []
    for k, r in enumerate(ranks):
        if not 1 <= r <= t.shape[k]:
            raise ShapeError(f"mode-{k + 1} rank {r} out of range for extent {t.shape[k]}")
        factors.append(_mode_basis(unfold(t, k + 1), r))
    core = t
    for k, u in enumerate(factors):
        core = mode_multiply(core, k + 1, u.T)  # type: ignore[union-attr]
    return TuckerRep(core=core, factors=tuple(factors))


def tucker_partial(
    t: np.ndarray,
    ranks: list[int | None] | tuple[int | None, ...],
    shared: tuple[int, int] | None = None,
    shared_from: str = "first",
) -> TuckerRep:
    """Tucker compression of a chosen subset of modes.

    Args:
        t: Tensor.
        ranks: Per-mode entry: an int compresses that mode to the given
            rank, ``None`` leaves it alone (identity factor).
        shared: Optional pair of 1-based modes forced to share one factor;
            both entries of ``ranks`` must carry the same rank and the two
            extents must agree.
        shared_from: Where the shared factor comes from: ``"first"`` uses the
            unfolding of the first mode of the pair, ``"concat"`` the
            column-concatenation of both unfoldings.

    Returns:
        :class:`TuckerRep` with ``None`` factors marking untouched modes.
    """
    if len(ranks) != t.ndim:
        raise ShapeError(f"expected {t.ndim} rank entries, got {len(ranks)}")
    factors: list[np.ndarray | None] = [None] * t.ndim

    share = ()
    if shared is not None:
        a, b = shared
        for mode in (a, b):
            if not 1 <= mode <= t.ndim:
                raise ShapeError(f"shared mode {mode} out of range")
        if t.shape[a - 1] != t.shape[b - 1]:
            raise ShapeError("shared modes must have equal extents")
        if ranks[a - 1] != ranks[b - 1] or ranks[a - 1] is None:
            raise ShapeError("shared modes must request one common rank")
        r = int(ranks[a - 1])
        if shared_from == "first":
            basis_src = unfold(t, a)
        elif shared_from == "concat":
            basis_src = np.hstack([unfold(t, a), unfold(t, b)])
        else:
            raise ValueError(f"unknown shared_from {shared_from!r}")
        u = _mode_basis(basis_src, r)
        factors[a - 1] = u
        factors[b - 1] = u
        share = (a - 1, b - 1)

    for k, r in enumerate(ranks):
        if k in share or r is None:
            continue
        if not 1 <= r <= t.shape[k]:
            raise ShapeError(f"mode-{k + 1} rank {r} out of range for extent {t.shape[k]}")
        factors[k] = _mode_basis(unfold(t, k + 1), r)

    core = t
    for k, u in enumerate(factors):
        if u is not None:
            core = mode_multiply(core, k + 1, u.T)
    return TuckerRep(core=core, factors=tuple(factors))


# ---------------------------------------------------------------------------
# CP
# ---------------------------------------------------------------------------


def _cp_init(t: np.ndarray, r: int) -> list[np.ndarray]:
    """Leading left singular vectors per mode, random-padded when r is large."""
    rng = np.random.default_rng(_CP_FALLBACK_SEED)
    factors = []
    for k in range(3):
        extent = t.shape[k]
        mat = unfold(t, k + 1)
        keep = min(r, extent, mat.shape[1])
        u, _, _ = svd_truncated(mat, keep)
        if keep < r:
            u = np.hstack([u, rng.standard_normal((extent, r - keep))])
        factors.append(u)
    return factors


def cp_als(
    t: np.ndarray,
    r: int,
    max_iters: int = 500,
    tol: float = 1e-10,
) -> CpResult:
    """Rank-``r`` CP decomposition of an order-3 tensor by alternating LS.

    Factors are initialized from the per-mode HOSVD bases (seeded random
    columns fill in when ``r`` exceeds a mode extent); each sweep solves the
    three least-squares subproblems exactly via pseudoinverse, so the fit
    ``1 - ||t - t_hat||_F / ||t||_F`` is nondecreasing.  Iteration stops once
    the fit improves by less than ``tol`` or after ``max_iters`` sweeps.

    Raises:
        ShapeError: If ``t`` is not order 3 or ``r < 1``.
        ValueError: If ``t`` is identically zero.
    """
    if t.ndim != 3:
        raise ShapeError("cp_als expects an order-3 tensor")
    if r < 1:
        raise ShapeError("CP rank must be at least 1")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    norm_t = fro_norm(t)
    if norm_t == 0.0:
        raise ValueError("cp_als: zero tensor has no meaningful CP factorization")

    factors = _cp_init(t, r)
    unfoldings = [unfold(t, k + 1) for k in range(3)]
    grams = [f.T @ f for f in factors]

    fit_history: list[float] = []
    fit_prev = -np.inf
    converged = False
    n_iters = 0
    for n_iters in range(1, max_iters + 1):
        for k in range(3):
            others = [j for j in range(3) if j != k]
            # columns of the mode-k unfolding enumerate the other modes with
            # the earlier one fastest, hence the reversed khatri-rao order
            kr = khatri_rao(factors[others[1]], factors[others[0]])
            v = grams[others[0]] * grams[others[1]]
            factors[k] = unfoldings[k] @ kr @ np.linalg.pinv(v)
            norms = np.linalg.norm(factors[k], axis=0)
            norms[norms == 0] = 1.0
            factors[k] = factors[k] / norms
            if k == 2:
                lam = norms  # weights from the last update of each sweep
            grams[k] = factors[k].T @ factors[k]

        approx = np.einsum("ir,jr,kr->ijk", factors[0] * lam, factors[1], factors[2])
        fit = 1.0 - fro_norm(t - approx) / norm_t
        fit_history.append(fit)
        if abs(fit - fit_prev) < tol:
            converged = True
            break
        fit_prev = fit

    rep = KruskalRep(x=factors[0] * lam, y=factors[1], z=factors[2])
    return CpResult(
        rep=rep,
        fit=fit_history[-1],
        fit_history=tuple(fit_history),
        n_iters=n_iters,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# randomized range finder
# ---------------------------------------------------------------------------


def randomized_mode_basis(
    t: np.ndarray,
    mode: int,
    r: int,
    config: SketchConfig,
) -> np.ndarray:
    """Orthonormal mode-``mode`` basis computed from a Gaussian sketch.

    Every other mode listed with a size in ``config.sizes`` is contracted
    with an i.i.d. standard normal matrix (drawn in ascending mode order
    from one PCG64 stream seeded with ``config.seed``); the basis is the
    ``r`` leading left singular vectors of the sketched tensor's
    mode-``mode`` unfolding.

    Raises:
        ShapeError: If a sketch size exceeds its extent, is smaller than
            ``r``, or targets the basis mode itself.
    """
    if not 1 <= mode <= t.ndim:
        raise ShapeError(f"mode {mode} out of range for order-{t.ndim} tensor")
    if len(config.sizes) != t.ndim:
        raise ShapeError(f"expected {t.ndim} sketch sizes, got {len(config.sizes)}")
    if config.sizes[mode - 1] is not None:
        raise ShapeError("the basis mode itself must not be sketched")

    rng = np.random.default_rng(config.seed)
    y = t
    for j in range(1, t.ndim + 1):
        size = config.sizes[j - 1]
        if j == mode or size is None:
            continue
        extent = y.shape[j - 1]
        if size > extent:
            raise ShapeError(f"sketch size {size} exceeds mode-{j} extent {extent}")
        if size < r:
            raise ShapeError(f"sketch size {size} is below the target rank {r}")
        omega = rng.standard_normal((size, extent))
        y = mode_multiply(y, j, omega)
    u, _, _ = svd_truncated(unfold(y, mode), r)
    return u
