import json
import math

import numpy as np
import pytest

from vbdf2 import experiments as X
from vbdf2.errors import InvalidArgument
from vbdf2.spatial import SpectralOperator


def test_forcing_is_manufactured():
    eps, kappa = 0.3, 0.2
    op = SpectralOperator(32, eps, kappa)
    Xg, Yg = op.grid()
    t = 0.4
    u = X.heat_mode(t, Xg, Yg)
    resid = X.heat_mode_dt(t, Xg, Yg) - op.apply(u) - X.heat_forcing(eps, kappa)(t, Xg, Yg)
    assert np.abs(resid).max() < 1e-10


def test_spatial_error_negligible_with_exact_start():
    # the single-mode solution lives on the grid, so only temporal error remains
    from vbdf2.mesh import uniform_mesh
    _, _, _, e1 = X.solve_heat(1.0, uniform_mesh(1.0, 64), 32, "exact")
    _, _, _, e2 = X.solve_heat(1.0, uniform_mesh(1.0, 64), 8, "exact")
    assert abs(e1 - e2) <= 1e-12


def test_config_requires_doubling():
    with pytest.raises(InvalidArgument):
        X.ExperimentConfig(N_list=(64, 100))
    with pytest.raises(InvalidArgument):
        X.ExperimentConfig(mesh_family="chebyshev")


def test_make_mesh_substreams():
    a = X.make_mesh("random", 1.0, 64, seed=1)
    b = X.make_mesh("random", 1.0, 64, seed=1)
    c = X.make_mesh("random", 1.0, 64, seed=2)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert not np.array_equal(a.tau, c.tau)
    assert X.make_mesh("capped-random", 1.0, 64, 1, r_cap=2.0).ratios.max() <= 2.0


def test_convergence_uniform_order_two():
    cfg = X.ExperimentConfig(epsilon=0.1, N_list=(32, 64, 128), mesh_family="uniform", M=8)
    rows = X.run_convergence(cfg)
    assert rows[0].order is None
    assert all(1.9 < r.order < 2.1 for r in rows[1:])
    assert X.fitted_order(rows) == pytest.approx(2.0, abs=0.1)


def test_fitted_order_exact_power_law():
    rows = [X.ConvergenceRow(N, 3.0 * N**-2.0, 1 / N, None, 1.0, 0) for N in (8, 16, 32)]
    assert X.fitted_order(rows) == pytest.approx(2.0, abs=1e-12)


@pytest.fixture(scope="module")
def small_report():
    counts = {k: 2 for k in X.SUITES}
    return X.run_stability_suite(0, counts)


def test_small_stability_report(small_report):
    names = [e.name for e in small_report.entries]
    assert "a_stability" in names and "doc_orthogonality_scaled" in names
    assert small_report.all_passed


@pytest.mark.parametrize("fmt", ["csv", "json", "md"])
def test_render_report(small_report, fmt):
    text = X.render(small_report, fmt)
    if fmt == "json":
        rows = json.loads(text)
        assert rows[0]["name"] == small_report.entries[0].name
    elif fmt == "csv":
        assert text.splitlines()[0] == ",".join(X.REPORT_FIELDS)
    else:
        assert text.splitlines()[1].startswith("| ---")


def test_render_convergence_table(tmp_path):
    rows = [X.ConvergenceRow(64, 1e-3, 0.03, None, 2.5, 0),
            X.ConvergenceRow(128, 2.5e-4, 0.015, 2.0, 3.0, 1)]
    md = X.render(rows, "md", "caption")
    assert md.splitlines()[0] == "caption"
    assert "| N | e(N) | tau | Order | max r_k | N1 |" in md
    assert "| 128 | 2.50e-04 | 1.50e-02 | 2.00 | 3.00 | 1 |" in md
    p = tmp_path / "t.csv"
    X.emit(rows, p, "csv")
    assert p.read_text().splitlines()[1].split(",")[3] == ""
    with pytest.raises(InvalidArgument):
        X.render(rows, "xml")


def test_caption_mentions_seed():
    cap = X.convergence_caption(X.ExperimentConfig(seed=7))
    assert "seed=7" in cap and math.isfinite(len(cap))
