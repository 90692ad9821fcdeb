import math

import numpy as np
import pytest

import foliate


def test_cardinal_kernel_and_shift():
    grid = foliate.Grid(3)
    nodes = grid.nodes()
    assert grid.size == 7
    assert foliate.gamma(0.0, 3) == pytest.approx(1.0)
    assert abs(foliate.gamma(nodes[1] - nodes[0], 3)) < 1e-13
    S = foliate.shift_matrix(grid, 0.4)
    T = foliate.shift_matrix(grid, -0.4)
    np.testing.assert_allclose(S @ T, np.eye(7), atol=1e-12)


def test_dataset_shapes_and_determinism():
    sp = foliate.make_system("shawpierre", {"A": 0.0}, omega0=0.79)
    assert sp.dim == 4
    d = foliate.generate_dataset(sp, n_traj=5, n_points=8, seed=3)
    assert len(d) == 5 * 7
    assert d.x.shape == (4, 35) and d.y.shape == (4, 35)
    again = foliate.generate_dataset(sp, n_traj=5, n_points=8, seed=3)
    np.testing.assert_array_equal(d.x, again.x)
    # consecutive triplets of one trajectory chain together
    np.testing.assert_array_equal(d.y[:, 0], d.x[:, 1])


def test_linear_spectrum_of_unforced_system():
    sp = foliate.make_system("shawpierre", {"A": 0.0}, omega0=0.79)
    d = foliate.generate_dataset(sp, n_traj=200, n_points=20, radius=0.05, seed=1)
    lin = foliate.identify_linear(d, ell=0)
    bundles = foliate.decompose_bundles(lin.model, d.omega)
    freqs = sorted(abs(math.atan2(c["lambda"].imag, c["lambda"].real)) / d.dt
                   for c in bundles.clusters)
    assert freqs[0] == pytest.approx(1.0, rel=1e-2)
    assert freqs[1] == pytest.approx(1.7314, rel=1e-2)
    assert "frequency" in bundles.report(d.dt)


def test_config_roundtrip_and_validation():
    c = foliate.Config()
    c.set("foliation.sigma=7")
    assert c.sigma == 7
    again = foliate.Config.from_text(c.text())
    assert again.sigma == 7
    c.modes = [9]
    with pytest.raises(foliate.ValidationError):
        c.validate()
    with pytest.raises(ValueError):
        c.set("nosuch.key=1")


def test_pipeline_on_small_linear_problem(tmp_path):
    c = foliate.Config()
    c.n_traj = 60
    c.n_points = 12
    c.radius = 0.2
    c.sigma = 3
    c.sweeps = 3
    c.output_dir = str(tmp_path)
    lines = []
    status = foliate.run_pipeline(c, "backbone", lines.append)
    assert [s for s, _ in status] == foliate.stages()
    assert not any(cached for _, cached in status)
    curve = foliate.read_backbone(tmp_path / "backbone.csv")
    assert curve["omega"][0] == pytest.approx(1.0, rel=2e-2)
    assert np.all(curve["zeta"] > 0)
    rerun = foliate.run_pipeline(c)
    assert all(cached for _, cached in rerun)
