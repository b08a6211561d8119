from __future__ import annotations

import math

import gmpy2
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frameward import _mp
from frameward.frames import FrameIndex, FrameSpec, index_set, pair_inner_product
from frameward.gram import (
    analysis,
    assemble_rect,
    assemble_square,
    auto_bits,
    bind_target,
    dump_matrix,
    frame_bounds,
    gram_block,
    growth_E,
    log2_kappa_forecast,
    required_bits,
)
from frameward.targets import from_callable, get_target

FE = FrameSpec.fe(2.0)
AUGF = FrameSpec.augmented_fourier(4)
WLEG = FrameSpec.weighted_legendre(0.5)
AUGON = FrameSpec.augmented_orthonormal()
FAMILIES = [FE, AUGF, WLEG, AUGON]


def _c(n):
    return math.sqrt(90) / math.pi ** 2 / n ** 2


def _f(a):
    return np.asarray(_mp.to_float(a), dtype=complex)


def test_augon_arrow_matrix():
    G = _f(assemble_square(AUGON, 4).matrix)
    ref = np.eye(4)
    for n in (1, 2, 3):
        ref[0, n] = ref[n, 0] = _c(n)
    np.testing.assert_allclose(G, ref, atol=1e-16)


def test_augf_fourier_block_is_identity():
    G = _f(assemble_square(AUGF, 20).matrix)
    np.testing.assert_array_equal(G[4:, 4:], np.eye(16))
    np.testing.assert_array_equal(np.diag(G), np.ones(20))


def test_fe_gram_is_toeplitz_in_frequency():
    idx = index_set(FE, 4)
    G = _f(assemble_square(FE, 4).matrix)
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            d = j.n - i.n
            ref = 0.5 if d == 0 else math.sin(math.pi * d / 2) / (math.pi * d)
            assert G[a, b] == pytest.approx(ref, abs=1e-16)
    i0, i1 = idx.index(FrameIndex("fourier", 0)), idx.index(FrameIndex("fourier", 1))
    assert G[i0, i1] == pytest.approx(1 / math.pi, rel=1e-15)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
@pytest.mark.parametrize("bits", [53, 128])
def test_square_gram_exactly_hermitian(spec, bits):
    N = 12
    G = assemble_square(spec, N, bits).matrix
    for i in range(N):
        for j in range(N):
            a, b = complex(G[i, j]) if bits == 53 else G[i, j], complex(G[j, i]) if bits == 53 else G[j, i]
            assert a.real == b.real
            assert getattr(a, "imag", 0) + getattr(b, "imag", 0) == 0


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
def test_entries_reproduce_pair_inner_product(spec):
    N = 12
    idx = index_set(spec, N)
    G = _f(assemble_square(spec, N).matrix)
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            assert G[a, b] == pytest.approx(complex(pair_inner_product(spec, i, j)), abs=2e-15)


def test_rect_with_m_equal_n_is_square():
    a = assemble_rect(FE, 10, 10)
    b = assemble_square(FE, 10)
    np.testing.assert_array_equal(a.matrix, b.matrix)


def test_fe_rect_rows_follow_longer_index_set():
    sys = assemble_rect(FE, 16, 8)
    rows, cols = index_set(FE, 16), index_set(FE, 8)
    assert list(sys.rows) == rows and list(sys.cols) == cols
    G = _f(sys.matrix)
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            assert G[a, b] == pytest.approx(pair_inner_product(FE, i, j), abs=1e-16)


def test_augf_rect_appends_fourier_rows():
    spec = FrameSpec.augmented_fourier(2)
    rect = assemble_rect(spec, 10, 8)
    sq = assemble_square(spec, 8)
    np.testing.assert_allclose(rect.matrix[:8], sq.matrix, rtol=0, atol=1e-16)
    assert [i.tag for i in rect.rows[8:]] == ["fourier", "fourier"]


def test_rect_rejects_m_below_n():
    with pytest.raises(ValueError):
        assemble_rect(FE, 4, 8)


@pytest.mark.parametrize("spec, N", [(FE, 6), (AUGF, 8), (WLEG, 6)], ids=["fe", "augf", "wleg"])
def test_gram_block_matches_assembly(spec, N):
    idx = index_set(spec, N)
    B = gram_block(spec, idx, idx)
    np.testing.assert_allclose(_f(B), _f(assemble_square(spec, N).matrix), atol=1e-15)


# ---------------------------------------------------------------- right-hand sides

def test_zero_target_gives_zero_rhs():
    zero = from_callable("zero", lambda t: np.zeros_like(t))
    y = bind_target(assemble_square(FE, 8), zero).rhs
    assert np.all(np.asarray(y) == 0)


def test_synthetic_rhs_closed_form():
    bits = 256
    y = bind_target(assemble_square(AUGON, 6, bits), get_target("synthetic-p51")).rhs
    mpmath.mp.prec = bits
    b = [mpmath.sqrt(6) / mpmath.pi / n for n in range(1, 6)]
    head = mpmath.sqrt(540) / mpmath.pi ** 3 * mpmath.zeta(3)  # sum_n b_n c_n
    assert abs(mpmath.mpf(str(y[0])) - head) < mpmath.mpf(2) ** -240
    for n in range(1, 6):
        assert abs(mpmath.mpf(str(y[n])) - b[n - 1]) < mpmath.mpf(2) ** -245


def test_fe_element_target_reproduces_gram_column():
    phi1 = from_callable("phi1", lambda t: np.exp(1j * np.pi * t) / math.sqrt(2))
    sys = bind_target(assemble_square(FE, 10), phi1)
    col = index_set(FE, 10).index(FrameIndex("fourier", 1))
    np.testing.assert_allclose(_f(sys.rhs), _f(sys.matrix[:, col]), atol=1e-14)


def test_analysis_matches_bound_rhs():
    f = get_target("runge25")
    idx = index_set(FE, 10)
    y = analysis(FE, f, idx)
    np.testing.assert_allclose(_f(y), _f(bind_target(assemble_square(FE, 10), f).rhs), atol=1e-15)


def test_bind_target_family_mismatch():
    with pytest.raises(TypeError):
        bind_target(assemble_square(AUGON, 4), get_target("exp"))
    with pytest.raises(TypeError):
        bind_target(assemble_square(FE, 4), get_target("synthetic-p51"))


# ---------------------------------------------------------------- frame bounds

@pytest.mark.parametrize("N", [4, 16, 50])
def test_augon_bounds_closed_form(N):
    fb = frame_bounds(assemble_square(AUGON, N, 256))
    mpmath.mp.prec = 256
    r = mpmath.sqrt(mpmath.zeta(4) - mpmath.zeta(4, N)) * mpmath.sqrt(90) / mpmath.pi ** 2
    assert abs(mpmath.mpf(str(fb.lower)) - (1 - r)) < 1e-60
    assert abs(mpmath.mpf(str(fb.upper)) - (1 + r)) < 1e-60


def test_identity_bounds():
    fb = frame_bounds(assemble_square(AUGF, 4))  # K=4, N=4: Legendre block only
    assert fb.lower == pytest.approx(1.0) and fb.upper == pytest.approx(1.0)


def test_fe_kappa_n20_order_of_magnitude():
    k = float(frame_bounds(assemble_square(FE, 20, 256)).kappa)
    assert 5.64e13 / 100 <= k <= 5.64e13 * 100


@pytest.mark.parametrize("spec, Ns", [
    (FE, range(2, 24, 2)),
    (AUGF, range(4, 24, 2)),
    (WLEG, range(2, 14, 2)),
    (AUGON, range(2, 30)),
], ids=["fe", "augf", "wleg", "augon"])
def test_truncated_bounds_monotone(spec, Ns):
    bits = 384
    A, B = [], []
    for N in Ns:
        fb = frame_bounds(assemble_square(spec, N, bits))
        A.append(fb.lower)
        B.append(fb.upper)
    with gmpy2.context(precision=bits):
        assert all(b <= a * (1 + gmpy2.mpfr(1e-12)) for a, b in zip(A, A[1:]))
        assert all(b >= a * (1 - gmpy2.mpfr(1e-12)) for a, b in zip(B, B[1:]))
    assert float(B[-1]) <= spec.upper_bound + 1e-12


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
def test_rayleigh_quotients_inside_bounds(spec):
    N = 16
    bits = 256
    sys = assemble_square(spec, N, bits)
    fb = frame_bounds(sys)
    G = _f(sys.matrix)
    rng = np.random.default_rng(3)
    lo, hi = float(fb.lower), float(fb.upper)
    for _ in range(100):
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        x /= np.linalg.norm(x)
        q = np.vdot(x, G @ x).real
        assert lo - 1e-14 <= q <= hi + 1e-14


def test_fe_spectrum_has_eigenvalues_far_below_a():
    from frameward.regsolve import hermitian_eig

    vals = hermitian_eig(assemble_square(FE, 50).matrix, vectors=False).values_float()
    assert np.min(vals) < FE.lower_bound / 10


# ---------------------------------------------------------------- precision rule

def test_growth_e_at_two():
    assert growth_E(2.0) == pytest.approx(3 + 2 * math.sqrt(2), rel=1e-15)


def test_required_bits_rule():
    N = 40
    assert required_bits(FE, N) == 64 + math.ceil(N * math.log2(3 + 2 * math.sqrt(2)))
    assert required_bits(AUGF, 64) == 64 + math.ceil(7 * math.log2(64))


@given(N=st.integers(1, 120))
@settings(max_examples=30, deadline=None)
def test_auto_bits_covers_required_bits(N):
    for spec in (FE, WLEG):
        n = 2 * N
        b = auto_bits(spec, n)
        assert b % 64 == 0 and b >= 128
        assert b >= required_bits(spec, n)


def test_auto_bits_at_table_size():
    assert auto_bits(FE, 160) >= 768


def test_augon_forecast_is_exact_kappa():
    N = 30
    k = float(frame_bounds(assemble_square(AUGON, N, 256)).kappa)
    assert log2_kappa_forecast(AUGON, N) == pytest.approx(math.log2(k), rel=1e-12)


# ---------------------------------------------------------------- matrix dump

def test_dump_matrix_double(tmp_path):
    sys = assemble_square(AUGF, 6)
    path = tmp_path / "g.txt"
    dump_matrix(sys, path)
    lines = path.read_bytes().decode().split("\n")
    assert lines[-1] == ""
    rows = [ln.split() for ln in lines[:-1]]
    assert len(rows) == 36
    G = _f(sys.matrix)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        assert complex(float(r[2]), float(r[3])) == G[i, j]


def test_dump_matrix_multiprecision_keeps_digits(tmp_path):
    sys = assemble_square(FE, 4, 256)
    path = tmp_path / "g.txt"
    dump_matrix(sys, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 16
    i, j, re, im = lines[1].split()
    assert (i, j) == ("0", "1")
    assert len(re.lstrip("-").replace(".", "").split("e")[0]) >= 70
    with gmpy2.context(precision=256):
        assert gmpy2.mpfr(re) == sys.matrix[0, 1]
        assert gmpy2.mpfr(im) == 0
