import numpy as np
import pytest

from subdfo.exceptions import CatalogError, UnsupportedDiagnosticError
from subdfo.problems import Problem, catalog, make_problem, true_criticality

ALL_NAMES = sorted(catalog())


def central_diff_grad(f, x, h=1e-5):
    n = x.size
    g = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_diff_hess_from_grad(grad, x, h=1e-5):
    n = x.size
    out = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (out + out.T)


class TestCatalog:
    def test_sphere_basics(self):
        p = make_problem("sphere", 4)
        assert p.raw_objective(p.x0) == pytest.approx(4.0)
        assert p.f_min == 0.0
        assert np.allclose(p.x0, 1.0)

    def test_saddle_quartic_minimum(self):
        p = make_problem("saddle_quartic", 3)
        x_star = np.array([0.0, 1.0 / np.sqrt(2.0), 0.0])
        assert p.raw_objective(x_star) == pytest.approx(-0.25, abs=1e-14)
        assert p.f_min == -0.25

    def test_chained_rosenbrock_minimizer(self):
        p = make_problem("chained_rosenbrock", 2)
        assert p.raw_objective(np.ones(2)) == pytest.approx(0.0, abs=1e-14)

    def test_unknown_name(self):
        with pytest.raises(CatalogError):
            make_problem("nope", 5)

    def test_low_rank_parameter_parsing(self):
        p = make_problem("low_rank_quadratic(3)", 10)
        h = p.hessian_oracle(p.x0)
        assert np.linalg.matrix_rank(h, tol=1e-8) == 3
        assert make_problem("low_rank_quadratic", 10).name == "low_rank_quadratic(5)"

    def test_dimension_floor(self):
        with pytest.raises(Exception):
            make_problem("sphere", 1)


class TestOracles:
    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_gradient_matches_finite_differences(self, name):
        n = 6
        p = make_problem(name, n)
        rng = np.random.default_rng(hash(name) % 2**32)
        for _ in range(100):
            x = p.x0 + rng.uniform(-0.5, 0.5, n)
            g = p.gradient_oracle(x)
            g_fd = central_diff_grad(p.raw_objective, x)
            scale = max(1.0, np.linalg.norm(g))
            assert np.linalg.norm(g - g_fd) <= 1e-6 * scale

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_hessian_matches_finite_differences(self, name):
        n = 5
        p = make_problem(name, n)
        rng = np.random.default_rng(hash(name) % 2**31)
        for _ in range(20):
            x = p.x0 + rng.uniform(-0.5, 0.5, n)
            h = p.hessian_oracle(x)
            h_fd = central_diff_hess_from_grad(p.gradient_oracle, x)
            scale = max(1.0, np.linalg.norm(h, 2))
            assert np.max(np.abs(h - h_fd)) <= 1e-6 * scale

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_objective_bounded_below_by_f_min(self, name):
        n = 4
        p = make_problem(name, n)
        rng = np.random.default_rng(123)
        xs = p.x0 + rng.uniform(-2.0, 2.0, size=(10000, n))
        vals = np.array([p.raw_objective(x) for x in xs])
        assert np.all(vals >= p.f_min - 1e-12)

    def test_eval_counter_exact(self):
        p = make_problem("sphere", 3)
        for _ in range(17):
            p.objective(p.x0)
        assert p.evals == 17
        p.reset_evals()
        assert p.evals == 0
        q = p.fresh()
        p.objective(p.x0)
        assert q.evals == 0


class TestTrueCriticality:
    def test_sphere_at_origin(self):
        p = make_problem("sphere", 4)
        rep = true_criticality(p, np.zeros(4))
        assert rep.sigma == pytest.approx(0.0, abs=1e-14)

    def test_saddle_at_origin(self):
        p = make_problem("saddle_quartic", 4)
        rep = true_criticality(p, np.zeros(4))
        assert rep.grad_norm == pytest.approx(0.0, abs=1e-14)
        assert rep.tau == pytest.approx(2.0, abs=1e-12)
        assert rep.sigma == pytest.approx(2.0, abs=1e-12)

    def test_sphere_off_origin(self):
        p = make_problem("sphere", 3)
        x = np.array([1.0, 0.0, 0.0])
        rep = true_criticality(p, x)
        assert rep.sigma == pytest.approx(2.0, abs=1e-12)

    def test_missing_oracle(self):
        p = Problem("custom", 2, lambda x: 0.0, None, None, np.zeros(2), 0.0)
        with pytest.raises(UnsupportedDiagnosticError):
            true_criticality(p, np.zeros(2))
