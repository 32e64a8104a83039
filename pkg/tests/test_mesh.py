import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbdf2 import mesh as M
from vbdf2.errors import InvalidArgument
from vbdf2.rng import splitmix64, substream_seed, uniform_open


def test_splitmix64_reference_vector():
    # reference output of the published SplitMix64 generator for seed 1234567
    out = splitmix64(1234567, 3)
    assert int(out[0]) == 6457827717110365317
    assert int(out[1]) == 3203168211198807973
    assert int(out[2]) == 9817491932198370423


def test_splitmix64_offset_is_a_window():
    full = splitmix64(42, 10)
    np.testing.assert_array_equal(splitmix64(42, 4, offset=6), full[6:])


def test_uniform_open_excludes_endpoints():
    u = uniform_open(7, 100_000)
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_substreams_differ():
    assert substream_seed(0, 1) != substream_seed(0, 2)
    assert substream_seed(0, 1, 2) != substream_seed(0, 2, 1)


def test_constants():
    assert M.R_S1 == pytest.approx(3.5615528128088303, rel=1e-15)
    assert M.R_GRIGORIEFF == pytest.approx(2.414213562373095, rel=1e-15)


def test_from_steps_and_ratios():
    m = M.TimeMesh.from_steps([0.1, 0.2, 0.1])
    np.testing.assert_allclose(m.t, [0, 0.1, 0.3, 0.4])
    np.testing.assert_allclose(m.ratios, [2.0, 0.5])
    assert m.ratio(2) == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        m.ratio(1)


@pytest.mark.parametrize("t", [[0.0], [0.1, 0.2], [0.0, 0.2, 0.1]])
def test_bad_levels_rejected(t):
    with pytest.raises(InvalidArgument):
        M.TimeMesh.from_levels(t)


def test_nonpositive_steps_rejected():
    with pytest.raises(InvalidArgument):
        M.TimeMesh.from_steps([0.1, 0.0])


def test_uniform_mesh():
    m = M.uniform_mesh(2.0, 8)
    assert m.n_steps == 8 and m.final_time == 2.0
    np.testing.assert_allclose(m.ratios, 1.0)


@pytest.mark.parametrize("q", [0.5, 1.5, 3.0, 3.5])
def test_geometric_mesh_ratios(q):
    m = M.geometric_mesh(1.0, 200, q)
    np.testing.assert_allclose(m.ratios, q, rtol=1e-12)
    assert m.final_time == pytest.approx(1.0, rel=1e-12)


def test_random_mesh_reproducible():
    a = M.random_mesh(1.0, 50, 3)
    b = M.random_mesh(1.0, 50, 3)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert a.final_time == 1.0
    assert not np.array_equal(a.tau, M.random_mesh(1.0, 50, 4).tau)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 300), seed=st.integers(0, 2**32), cap=st.floats(1.01, 10.0))
def test_capped_random_respects_cap(N, seed, cap):
    m = M.capped_random_mesh(1.0, N, seed, cap)
    assert np.all(m.ratios <= cap)
    assert m.final_time == pytest.approx(1.0, rel=1e-12)


def test_capped_random_tiny_cap_rejected():
    with pytest.raises(InvalidArgument):
        M.capped_random_mesh(1.0, 10, 0, 1e-4)


def test_ratio_profile_bands():
    # ratios 2, 3, 0.5, 5: one in the Grigorieff band, one beyond S1
    steps = np.cumprod([1.0, 2.0, 3.0, 0.5, 5.0])
    prof = M.ratio_profile(M.TimeMesh.from_steps(steps))
    assert prof.r_max == pytest.approx(5.0)
    assert prof.n0_count == 1
    assert prof.n1_count == 1
    assert prof.r_c == pytest.approx(2.0)
    assert prof.r_hat_c == pytest.approx(3.0)
    assert not M.check_s1(prof)


def test_single_step_profile():
    prof = M.ratio_profile(M.uniform_mesh(1.0, 1))
    assert prof.r_max == 1.0 and prof.n0_count == 0 and M.check_s1(prof)


def test_s1_boundary_is_inclusive():
    m = M.TimeMesh.from_steps([1.0, M.R_S1])
    assert M.check_s1(M.ratio_profile(m))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), scale=st.floats(1e-6, 1e6))
def test_s1_scale_invariant(seed, scale):
    m = M.random_mesh(1.0, 40, seed)
    assert M.check_s1(M.ratio_profile(m)) == M.check_s1(M.ratio_profile(m.scaled(scale)))


def test_gamma_n_by_hand():
    # r_2..r_6 = 2, 1, 3, 0.5, 1
    steps = np.cumprod([1.0, 2.0, 1.0, 3.0, 0.5, 1.0])
    prof = M.ratio_profile(M.TimeMesh.from_steps(steps))
    assert M.gamma_n(prof, 3) == 0.0
    # k=2: max(0, 2-3)=0; k=3: max(0, 1-0.5)=0.5; k=4: max(0, 3-1)=2
    assert M.gamma_n(prof, 6) == pytest.approx(2.5)
    assert M.gamma_n(prof, 4) == 0.0
    with pytest.raises(InvalidArgument):
        M.gamma_n(prof, 7)


def test_gamma_uniform_is_zero():
    prof = M.ratio_profile(M.uniform_mesh(1.0, 30))
    assert M.gamma_n(prof, 30) == 0.0


def test_mesh_csv_roundtrip(tmp_path):
    m = M.random_mesh(1.0, 17, 9)
    p = tmp_path / "mesh.csv"
    M.write_mesh_csv(m, p)
    assert p.read_text().splitlines()[0] == "k,t_k"
    back = M.read_mesh_csv(p)
    np.testing.assert_array_equal(back.t, m.t)


def test_mesh_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n0,0\n1,1\n")
    with pytest.raises(InvalidArgument):
        M.read_mesh_csv(p)


def test_geometric_long_contraction():
    m = M.geometric_mesh(1.0, 1000, 0.5)
    assert np.all(m.tau > 0) and math.isfinite(m.final_time)
    # 0.5**1199 is below the smallest subnormal
    with pytest.raises(InvalidArgument):
        M.geometric_mesh(1.0, 1200, 0.5)
