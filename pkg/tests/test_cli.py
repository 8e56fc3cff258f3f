"""End-to-end runs of the command-line interface, in process."""

import struct

import numpy as np
import pytest

from blockten.cli import main
from blockten.container import container_read
from blockten.fileio import read_matrix, read_vector, write_matrix, write_vector

def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def kv(out: str) -> dict:
    pairs = {}
    for line in out.splitlines():
        if ": " in line:
            key, _, val = line.partition(": ")
            pairs[key] = val
    return pairs


def block_toeplitz(rng, s, m, band):
    blocks = {d: rng.standard_normal((m, m)) for d in range(-band, band + 1)}
    a = np.zeros((s * m, s * m))
    for i in range(s):
        for j in range(s):
            if abs(j - i) <= band:
                a[i * m:(i + 1) * m, j * m:(j + 1) * m] = blocks[j - i]
    return a


@pytest.fixture
def toep(tmp_path):
    a = block_toeplitz(np.random.default_rng(101), s=6, m=4, band=2)
    path = tmp_path / "toep.mtx"
    write_matrix(path, a)
    return path, a


def test_analyze_reports_structure(toep, capsys):
    path, _ = toep
    code, out, _ = run_cli(capsys, "analyze", path, "--block-rows", 4, "--block-cols", 4)
    assert code == 0
    pairs = kv(out)
    assert pairs["structure_class"] == "toeplitz"
    assert pairs["grid"] == "6 x 6"
    assert pairs["classes"] == "5"
    assert pairs["eta_histogram"] == "6x1 5x2 4x2"
    assert "mode2_sv" in pairs


def test_analyze_machine_singular_values_match_oracle(toep, capsys):
    from blockten.blocks import detect_pattern, mat_to_tensor
    from blockten.tensor import unfold

    path, a = toep
    code, out, _ = run_cli(capsys, "analyze", path, "--block-rows", 4,
                           "--block-cols", 4, "--machine")
    assert code == 0
    rows = [ln.split("\t") for ln in out.splitlines() if ln[:1].isdigit()]
    got = {int(m): [] for m in (1, 2, 3)}
    for mode, _idx, val in rows:
        got[int(mode)].append(float(val))
    pattern, _ = detect_pattern(a, 4, 4)
    t = mat_to_tensor(a, pattern)
    for mode in (1, 2, 3):
        sv = np.linalg.svd(unfold(t, mode), compute_uv=False)
        np.testing.assert_allclose(got[mode], sv, rtol=1e-12)


def test_compress_reconstruct_roundtrip_full_rank(toep, tmp_path, capsys):
    path, a = toep
    out_c = tmp_path / "full.btc"
    code, out, _ = run_cli(capsys, "compress", path, "-o", out_c,
                           "--block-rows", 4, "--block-cols", 4,
                           "--method", "hosvd", "--ranks", "4,5,4")
    assert code == 0
    pairs = kv(out)
    assert pairs["kind"] == "KronSumRep"
    assert float(pairs["relerr_fro"]) < 1e-12

    out_m = tmp_path / "back.mtx"
    code, _, _ = run_cli(capsys, "reconstruct", out_c, "-o", out_m)
    assert code == 0
    back = read_matrix(out_m)
    assert np.linalg.norm(a - back) <= 1e-12 * np.linalg.norm(a)


def test_mode2_exact_when_slices_live_in_small_subspace(tmp_path, capsys):
    rng = np.random.default_rng(102)
    base = rng.standard_normal((2, 4, 4))
    s, band = 6, 5
    coeffs = rng.standard_normal((2 * s - 1, 2))
    blocks = {d: np.einsum("c,cij->ij", coeffs[d + s - 1], base)
              for d in range(-band, band + 1)}
    a = np.zeros((s * 4, s * 4))
    for i in range(s):
        for j in range(s):
            a[i * 4:(i + 1) * 4, j * 4:(j + 1) * 4] = blocks[j - i]
    path = tmp_path / "a.mtx"
    write_matrix(path, a)

    for fmt in ("kron_sum", "blr"):
        out_c = tmp_path / f"{fmt}.btc"
        code, out, _ = run_cli(capsys, "compress", path, "-o", out_c,
                               "--block-rows", 4, "--block-cols", 4,
                               "--method", "mode2", "--rank", 2,
                               "--output", fmt, "--pattern", "toeplitz")
        assert code == 0
        assert float(kv(out)["relerr_fro"]) < 1e-12


def test_tol_selects_minimal_rank(tmp_path, capsys):
    rng = np.random.default_rng(103)
    base = rng.standard_normal((2, 4, 4))
    s = 5
    coeffs = rng.standard_normal((2 * s - 1, 2))
    blocks = {d: np.einsum("c,cij->ij", coeffs[d + s - 1], base)
              for d in range(-(s - 1), s)}
    a = np.zeros((s * 4, s * 4))
    for i in range(s):
        for j in range(s):
            a[i * 4:(i + 1) * 4, j * 4:(j + 1) * 4] = blocks[j - i]
    path = tmp_path / "a.mtx"
    write_matrix(path, a)
    code, out, _ = run_cli(capsys, "compress", path, "-o", tmp_path / "t.btc",
                           "--block-rows", 4, "--block-cols", 4,
                           "--method", "mode2", "--tol", "1e-10")
    assert code == 0
    pairs = kv(out)
    assert pairs["ranks"] == "2"
    assert float(pairs["relerr_fro"]) < 1e-10


def test_randomized_seed_reproducibility(toep, tmp_path, capsys):
    path, _ = toep
    blobs = {}
    for name, seed in (("s1", 9), ("s2", 9), ("s3", 10)):
        out_c = tmp_path / f"{name}.btc"
        code, _, _ = run_cli(capsys, "compress", path, "-o", out_c,
                             "--block-rows", 4, "--block-cols", 4,
                             "--method", "mode2", "--rank", 3,
                             "--randomized", "--sketch", 4, "--seed", seed)
        assert code == 0
        blobs[name] = out_c.read_bytes()
    assert blobs["s1"] == blobs["s2"]
    assert blobs["s1"] != blobs["s3"]


def test_matvec_matches_dense_product(toep, tmp_path, capsys):
    path, a = toep
    out_c = tmp_path / "full.btc"
    run_cli(capsys, "compress", path, "-o", out_c, "--block-rows", 4,
            "--block-cols", 4, "--method", "hosvd", "--ranks", "4,5,4")
    x = np.random.default_rng(104).standard_normal(a.shape[1])
    xp = tmp_path / "x.txt"
    write_vector(xp, x)
    yp = tmp_path / "y.txt"
    code, _, _ = run_cli(capsys, "matvec", out_c, xp, "-o", yp)
    assert code == 0
    y = read_vector(yp)
    assert np.linalg.norm(a @ x - y) <= 1e-12 * np.linalg.norm(a @ x)


def spd_block_toeplitz(rng, s, m):
    g = rng.standard_normal((m, m))
    t0 = g @ g.T + 8.0 * np.eye(m)
    offs = {d: 0.25 * rng.standard_normal((m, m)) for d in range(1, s)}
    a = np.zeros((s * m, s * m))
    for i in range(s):
        for j in range(s):
            d = j - i
            blk = t0 if d == 0 else (offs[d] if d > 0 else offs[-d].T)
            a[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk
    return a


def test_spd_compress_and_factored_matvec(tmp_path, capsys):
    a = spd_block_toeplitz(np.random.default_rng(105), s=5, m=6)
    path = tmp_path / "spd.mtx"
    write_matrix(path, a)
    out_c = tmp_path / "spd.btc"
    code, out, _ = run_cli(capsys, "compress", path, "-o", out_c,
                           "--block-rows", 6, "--block-cols", 6,
                           "--method", "spd", "--rank", 3,
                           "--pattern", "toeplitz")
    assert code == 0
    assert kv(out)["kind"] == "SpdRep"

    rep = container_read(out_c)
    dense = rep.densify()
    np.linalg.cholesky(dense)  # stays SPD after truncation

    x = np.random.default_rng(106).standard_normal(a.shape[1])
    xp, yp = tmp_path / "x.txt", tmp_path / "y.txt"
    write_vector(xp, x)
    code, _, _ = run_cli(capsys, "matvec", out_c, xp, "-o", yp)
    assert code == 0
    y = read_vector(yp)
    assert np.linalg.norm(dense @ x - y) <= 1e-12 * np.linalg.norm(dense @ x)


def test_spsd_report_from_container_alone(tmp_path, capsys):
    a = spd_block_toeplitz(np.random.default_rng(107), s=5, m=6)
    path = tmp_path / "spd.mtx"
    write_matrix(path, a)
    out_c = tmp_path / "spsd.btc"
    code, out, _ = run_cli(capsys, "compress", path, "-o", out_c,
                           "--block-rows", 6, "--block-cols", 6,
                           "--method", "spsd", "--rank", 4,
                           "--pattern", "toeplitz")
    assert code == 0
    compress_pairs = kv(out)
    code, out, _ = run_cli(capsys, "report", out_c)
    assert code == 0
    pairs = kv(out)
    assert pairs["kind"] == "SpsdRep"
    assert pairs["rank"] == "4"
    assert pairs["shape"] == "30 x 30"
    # storage ratio derives from the pattern alone, so it matches compress time
    assert float(pairs["storage_ratio"]) == pytest.approx(
        float(compress_pairs["storage_ratio"]))


def test_report_with_matrix_adds_error_metrics(toep, tmp_path, capsys):
    path, _ = toep
    out_c = tmp_path / "c.btc"
    run_cli(capsys, "compress", path, "-o", out_c, "--block-rows", 4,
            "--block-cols", 4, "--method", "mode2", "--rank", 3)
    code, out, _ = run_cli(capsys, "report", out_c, "--matrix", path)
    assert code == 0
    pairs = kv(out)
    assert "relerr_fro" in pairs and "storage_ratio" in pairs


def test_cp_compress_runs(toep, tmp_path, capsys):
    path, _ = toep
    code, out, _ = run_cli(capsys, "compress", path, "-o", tmp_path / "cp.btc",
                           "--block-rows", 4, "--block-cols", 4,
                           "--method", "cp", "--rank", 3)
    assert code == 0
    pairs = kv(out)
    assert pairs["kind"] == "KronSumRep"
    assert "cp_fit" in pairs


# ---------------------------------------------------------------------------
# failure taxonomy
# ---------------------------------------------------------------------------


def test_exit_2_missing_input(tmp_path, capsys):
    code, _, err = run_cli(capsys, "analyze", tmp_path / "nope.mtx",
                           "--block-rows", 2, "--block-cols", 2)
    assert code == 2
    assert "error" in err


def test_exit_2_usage_errors(toep, tmp_path, capsys):
    path, _ = toep
    out_c = tmp_path / "o.btc"
    cases = [
        ("--method", "cp", "--rank", 2, "--randomized"),
        ("--method", "mode2", "--ranks", "1,2,3"),
        ("--method", "cp", "--tol", "1e-3"),
        ("--method", "spsd", "--rank", 0),
        ("--method", "hosvd", "--ranks", "1,2"),
        ("--method", "hosvd", "--ranks", "a,b,c"),
    ]
    for extra in cases:
        code, _, err = run_cli(capsys, "compress", path, "-o", out_c,
                               "--block-rows", 4, "--block-cols", 4, *extra)
        assert code == 2, extra
        assert "error" in err


def test_exit_2_argparse_level(capsys):
    code, _, _ = run_cli(capsys, "compress", "x.mtx", "-o", "y.btc",
                         "--block-rows", 4, "--block-cols", 4,
                         "--method", "bogus", "--rank", 1)
    assert code == 2


def test_exit_3_dimension_mismatch(toep, tmp_path, capsys):
    path, _ = toep
    code, _, err = run_cli(capsys, "compress", path, "-o", tmp_path / "o.btc",
                           "--block-rows", 5, "--block-cols", 4,
                           "--method", "hosvd", "--rank", 2)
    assert code == 3
    assert "does not tile" in err


def test_exit_3_matvec_length_mismatch(toep, tmp_path, capsys):
    path, _ = toep
    out_c = tmp_path / "c.btc"
    run_cli(capsys, "compress", path, "-o", out_c, "--block-rows", 4,
            "--block-cols", 4, "--method", "hosvd", "--rank", 2)
    xp = tmp_path / "x.txt"
    write_vector(xp, np.ones(7))
    code, _, _ = run_cli(capsys, "matvec", out_c, xp, "-o", tmp_path / "y.txt")
    assert code == 3


def test_exit_2_truncated_container(toep, tmp_path, capsys):
    path, _ = toep
    out_c = tmp_path / "c.btc"
    run_cli(capsys, "compress", path, "-o", out_c, "--block-rows", 4,
            "--block-cols", 4, "--method", "hosvd", "--rank", 2)
    trunc = tmp_path / "trunc.btc"
    trunc.write_bytes(out_c.read_bytes()[:-64])
    code, _, err = run_cli(capsys, "reconstruct", trunc, "-o", tmp_path / "z.mtx")
    assert code == 2
    assert "truncat" in err


def test_exit_3_corrupted_extent_field(toep, tmp_path, capsys):
    path, _ = toep
    out_c = tmp_path / "c.btc"
    run_cli(capsys, "compress", path, "-o", out_c, "--block-rows", 4,
            "--block-cols", 4, "--method", "hosvd", "--rank", 2)
    blob = bytearray(out_c.read_bytes())
    off = blob.find(b"\n---\n") + 5 + 8  # first extent of the first array
    ext = struct.unpack_from("<q", blob, off)[0]
    struct.pack_into("<q", blob, off, ext + 1)
    bad = tmp_path / "bad.btc"
    bad.write_bytes(bytes(blob))
    code, _, err = run_cli(capsys, "reconstruct", bad, "-o", tmp_path / "z.mtx")
    assert code == 3
    assert "extents" in err


def test_exit_4_indefinite_matrix_for_spd(tmp_path, capsys):
    m, s = 3, 4
    t0 = np.diag([1.0, -5.0, 2.0])
    off = 0.1 * np.random.default_rng(108).standard_normal((m, m))
    a = np.zeros((s * m, s * m))
    for i in range(s):
        for j in range(s):
            d = j - i
            if d == 0:
                a[i * m:(i + 1) * m, j * m:(j + 1) * m] = t0
            elif d == 1:
                a[i * m:(i + 1) * m, j * m:(j + 1) * m] = off
            elif d == -1:
                a[i * m:(i + 1) * m, j * m:(j + 1) * m] = off.T
    path = tmp_path / "indef.mtx"
    write_matrix(path, a)
    code, _, err = run_cli(capsys, "compress", path, "-o", tmp_path / "i.btc",
                           "--block-rows", 3, "--block-cols", 3,
                           "--method", "spd", "--rank", 2,
                           "--pattern", "toeplitz", "--band", 1)
    assert code == 4
    assert "positive definite" in err
