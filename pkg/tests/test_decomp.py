"""Factorization kernels: SVD/QR/Cholesky conventions, Tucker, CP, sketching."""

from __future__ import annotations

import numpy as np
import pytest

from blockten.decomp import (
    SketchConfig,
    TuckerRep,
    cholesky,
    cp_als,
    hosvd,
    qr_thin,
    randomized_mode_basis,
    svd_truncated,
    tucker_partial,
)
from blockten.errors import NotPositiveDefiniteError, ShapeError
from blockten.tensor import fro_norm, mode_multiply, unfold


def test_svd_truncated_reconstructs_at_full_rank():
    a = np.random.default_rng(0).standard_normal((6, 4))
    u, s, v = svd_truncated(a, 4)
    np.testing.assert_allclose(u @ np.diag(s) @ v.T, a, atol=1e-13)
    assert np.all(np.diff(s) <= 0)


def test_svd_truncated_sign_convention():
    a = np.random.default_rng(1).standard_normal((7, 5))
    u, _, _ = svd_truncated(a, 3)
    for col in u.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_svd_truncation_error_matches_tail():
    a = np.random.default_rng(2).standard_normal((8, 6))
    sig = np.linalg.svd(a, compute_uv=False)
    u, s, v = svd_truncated(a, 3)
    err = np.linalg.norm(a - u @ np.diag(s) @ v.T)
    assert np.isclose(err, np.sqrt((sig[3:] ** 2).sum()), rtol=1e-12)


def test_svd_truncated_rank_range():
    a = np.eye(3)
    with pytest.raises(ShapeError):
        svd_truncated(a, 0)
    with pytest.raises(ShapeError):
        svd_truncated(a, 4)


def test_qr_thin_contract():
    a = np.random.default_rng(3).standard_normal((6, 3))
    q, r = qr_thin(a)
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-13)
    np.testing.assert_allclose(q @ r, a, atol=1e-13)
    assert np.all(np.diag(r) >= 0)
    with pytest.raises(ShapeError):
        qr_thin(a.T)


def test_cholesky_contract():
    rng = np.random.default_rng(4)
    g = rng.standard_normal((5, 5))
    a = g @ g.T + 5 * np.eye(5)
    low = cholesky(a)
    assert np.allclose(np.triu(low, 1), 0)
    assert np.all(np.diag(low) > 0)
    np.testing.assert_allclose(low @ low.T, a, atol=1e-12)


def test_cholesky_rejects_indefinite_and_asymmetric():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.diag([1.0, -1.0]))
    with pytest.raises(ShapeError):
        cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ---------------------------------------------------------------------------
# Tucker
# ---------------------------------------------------------------------------


def test_hosvd_full_rank_is_exact():
    t = np.random.default_rng(5).standard_normal((3, 5, 2))
    rep = hosvd(t, t.shape)
    np.testing.assert_allclose(rep.reconstruct(), t, atol=1e-12)
    assert np.isclose(fro_norm(rep.core), fro_norm(t), rtol=1e-13)


def test_hosvd_core_norm_never_exceeds_tensor_norm():
    t = np.random.default_rng(6).standard_normal((4, 4, 3))
    rep = hosvd(t, (2, 3, 2))
    assert fro_norm(rep.core) <= fro_norm(t) + 1e-12
    for f in rep.factors:
        np.testing.assert_allclose(f.T @ f, np.eye(f.shape[1]), atol=1e-13)


def test_hosvd_error_bounded_by_tail_energy():
    t = np.random.default_rng(7).standard_normal((4, 5, 3))
    ranks = (2, 3, 2)
    rep = hosvd(t, ranks)
    err2 = fro_norm(t - rep.reconstruct()) ** 2
    tails = 0.0
    for k, r in enumerate(ranks):
        sig = np.linalg.svd(unfold(t, k + 1), compute_uv=False)
        tails += (sig[r:] ** 2).sum()
    assert err2 <= tails + 1e-10


def test_hosvd_rank_validation():
    t = np.zeros((2, 2, 2))
    with pytest.raises(ShapeError):
        hosvd(t, (2, 2))
    with pytest.raises(ShapeError):
        hosvd(t, (3, 2, 2))


def test_tucker_partial_identity_modes():
    t = np.random.default_rng(8).standard_normal((3, 6, 4))
    rep = tucker_partial(t, [None, 2, None])
    assert rep.factors[0] is None and rep.factors[2] is None
    assert rep.core.shape == (3, 2, 4)
    # mode-2-only compression at full rank is exact
    full = tucker_partial(t, [None, 6, None])
    np.testing.assert_allclose(full.reconstruct(), t, atol=1e-12)


def test_tucker_partial_shared_modes():
    rng = np.random.default_rng(9)
    t = rng.standard_normal((4, 3, 4))
    t = t + np.transpose(t, (2, 1, 0))  # mode-1/mode-3 symmetric slices
    rep = tucker_partial(t, [2, None, 2], shared=(1, 3))
    assert rep.factors[0] is rep.factors[2]
    rep2 = tucker_partial(t, [2, None, 2], shared=(1, 3), shared_from="concat")
    assert rep2.factors[0] is rep2.factors[2]
    with pytest.raises(ShapeError):
        tucker_partial(t, [2, None, 3], shared=(1, 3))
    with pytest.raises(ShapeError):
        tucker_partial(rng.standard_normal((3, 3, 4)), [2, None, 2], shared=(1, 3))


def test_tucker_rep_validates_factor_shapes():
    with pytest.raises(ShapeError):
        TuckerRep(core=np.zeros((2, 2, 2)), factors=(np.zeros((4, 3)), None, None))


# ---------------------------------------------------------------------------
# CP
# ---------------------------------------------------------------------------


def test_cp_als_exact_on_rank1():
    rng = np.random.default_rng(10)
    t = np.einsum("i,j,k->ijk", rng.standard_normal(4), rng.standard_normal(6), rng.standard_normal(3))
    res = cp_als(t, 1)
    assert res.fit > 1 - 1e-13
    np.testing.assert_allclose(res.rep.reconstruct(), t, atol=1e-12)


def test_cp_als_fit_monotone_and_below_one():
    t = np.random.default_rng(11).standard_normal((4, 5, 3))
    res = cp_als(t, 1, max_iters=60)
    assert res.fit < 1.0
    hist = res.fit_history
    assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))


def test_cp_als_rank_exceeding_extent_uses_padded_init():
    t = np.random.default_rng(12).standard_normal((2, 5, 3))
    res = cp_als(t, 4, max_iters=200)  # r=4 > extent 2 on mode 1
    assert res.rep.x.shape == (2, 4)
    assert 0 < res.fit <= 1 + 1e-12


def test_cp_als_rejects_zero_tensor_and_bad_args():
    with pytest.raises(ValueError):
        cp_als(np.zeros((2, 2, 2)), 1)
    with pytest.raises(ShapeError):
        cp_als(np.zeros((2, 2)), 1)
    with pytest.raises(ShapeError):
        cp_als(np.ones((2, 2, 2)), 0)


# ---------------------------------------------------------------------------
# randomized basis
# ---------------------------------------------------------------------------


def _exact_mode2_rank_tensor(rng, dims, r):
    base = rng.standard_normal((dims[0], r, dims[2]))
    mix = rng.standard_normal((dims[1], r))
    return mode_multiply(base, 2, mix)


def test_randomized_mode_basis_is_deterministic():
    rng = np.random.default_rng(13)
    t = rng.standard_normal((5, 12, 5))
    cfg = SketchConfig(seed=42, sizes=(4, None, 4))
    u1 = randomized_mode_basis(t, 2, 3, cfg)
    u2 = randomized_mode_basis(t, 2, 3, cfg)
    assert np.array_equal(u1, u2)
    u3 = randomized_mode_basis(t, 2, 3, SketchConfig(seed=43, sizes=(4, None, 4)))
    assert not np.array_equal(u1, u3)


def test_randomized_mode_basis_captures_exact_rank():
    rng = np.random.default_rng(14)
    t = _exact_mode2_rank_tensor(rng, (6, 15, 6), 3)
    u = randomized_mode_basis(t, 2, 3, SketchConfig(seed=7, sizes=(5, None, 5)))
    resid = unfold(t, 2) - u @ (u.T @ unfold(t, 2))
    assert np.linalg.norm(resid) < 1e-11 * np.linalg.norm(unfold(t, 2))


def test_randomized_mode_basis_validation():
    t = np.zeros((3, 4, 3))
    with pytest.raises(ShapeError):
        randomized_mode_basis(t, 2, 2, SketchConfig(seed=0, sizes=(2, 2, 2)))  # target sketched
    with pytest.raises(ShapeError):
        randomized_mode_basis(t, 2, 2, SketchConfig(seed=0, sizes=(9, None, 2)))  # too big
    with pytest.raises(ShapeError):
        randomized_mode_basis(t, 2, 2, SketchConfig(seed=0, sizes=(1, None, 2)))  # below rank
