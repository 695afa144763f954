"""
Tests for the Hamilton-Jacobi solvers and the homogenization / long-time experiments
"""

import unittest
import tempfile
import shutil
import sys
from pathlib import Path

import numpy as np

# Add paths for imports
sys.path.insert(0, str(Path(__file__).parent.parent))
from domain import MomentumGrid, TorusGrid, get_catalog
from hj import (
    GraphAction,
    HJSolution,
    ReducedGraphAction,
    graph_action,
    homogenization_experiment,
    longtime_slope,
    solve_laxoleinik,
    solve_variational,
)
from shared.errors import NotConvex, ResolutionBudget
from shared.storage import load_frame

QGRID = TorusGrid(64)
SMALL_QGRID = TorusGrid(32)
PGRID = MomentumGrid(-3.0, 3.0, 129)


def preset(name, qgrid=QGRID, pgrid=PGRID, **params):
    return get_catalog().build(name, qgrid=qgrid, pgrid=pgrid, **params)


def cosine(q):
    return 0.1 * np.cos(2 * np.pi * q)


class TestHJSolution(unittest.TestCase):
    """Test the solution container"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        times = np.array([0.0, 0.5, 1.0])
        values = np.stack([cosine(SMALL_QGRID.nodes()) - t for t in times])
        self.solution = HJSolution(SMALL_QGRID, times, values, field="demo", solver="laxoleinik")

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_slices(self):
        """Initial, final and named slices"""
        s = self.solution
        self.assertTrue(np.array_equal(s.initial, cosine(SMALL_QGRID.nodes())))
        self.assertTrue(np.allclose(s.at(0.5), s.initial - 0.5))
        self.assertEqual(s.t, 1.0)
        with self.assertRaises(ValueError):
            s.at(0.25)

    def test_action_bound(self):
        """u moves by exactly |t - s| here"""
        self.assertAlmostEqual(self.solution.action_bound_excess(1.0), 0.0, places=12)
        self.assertGreater(self.solution.action_bound_excess(0.5), 0.0)

    def test_shape_checked(self):
        """values must match times x grid"""
        with self.assertRaises(ValueError):
            HJSolution(SMALL_QGRID, np.array([0.0, 1.0]), np.zeros((3, 32)), field="x", solver="laxoleinik")
        with self.assertRaises(ValueError):
            HJSolution(SMALL_QGRID, np.array([0.5, 1.0]), np.zeros((2, 32)), field="x", solver="laxoleinik")

    def test_save(self):
        """Long-format CSV with a provenance header"""
        path = self.solution.save(self.test_dir / "u.csv", config_hash="abc")
        header, df = load_frame(path)
        self.assertEqual(header["kind"], "hj_solution")
        self.assertEqual(list(df.columns), ["t", "q", "u"])
        self.assertEqual(len(df), 3 * 32)


class TestLaxOleinikSolver(unittest.TestCase):
    """Test the inf-convolution solver"""

    def test_constants_propagate(self):
        """f = const and H = p^2/2 + c give u(t) = f - t c"""
        H = preset("shifted_free", shift=0.3)
        sol = solve_laxoleinik(H, lambda q: 0.5, 1.0)
        self.assertTrue(np.allclose(sol.final, 0.5 - 0.3, rtol=0, atol=1e-12))
        self.assertTrue(np.array_equal(sol.initial, np.full(64, 0.5)))
        self.assertEqual(sol.solver, "laxoleinik")

    def test_stability(self):
        """|u_f - u_g| <= |f - g|"""
        H = preset("pendulum")

        def g(q):
            return cosine(q) + 0.05 * np.sin(2 * np.pi * q)

        uf = solve_laxoleinik(H, cosine, 0.5)
        ug = solve_laxoleinik(H, g, 0.5)
        gap = np.max(np.abs(uf.initial - ug.initial))
        self.assertLessEqual(np.max(np.abs(uf.final - ug.final)), gap + 1e-12)

    def test_pendulum_lipschitz(self):
        """Pendulum from f = 0 to t = 5: finite, Lipschitz, between 0 and 1"""
        sol = solve_laxoleinik(preset("pendulum"), lambda q: 0.0, 5.0)
        self.assertTrue(np.all(np.isfinite(sol.values)))
        self.assertLessEqual(sol.value_function().lipschitz_constant(), PGRID.p_max)
        drift = sol.drift_removed(0.0)
        self.assertGreaterEqual(float(np.min(drift)), -1e-9)
        self.assertLessEqual(float(np.max(drift)), 1.0)

    def test_action_bound(self):
        """sup|u(t) - u(s)| <= sup|H| |t - s|"""
        H = preset("pendulum")
        sol = solve_laxoleinik(H, cosine, 0.5)
        self.assertLessEqual(sol.action_bound_excess(H.sup_abs), 1e-12)

    def test_time_additivity(self):
        """Solving to 0.4 equals solving to 0.2 twice"""
        H = preset("pendulum")
        whole = solve_laxoleinik(H, cosine, 0.4)
        half = solve_laxoleinik(H, cosine, 0.2)
        again = solve_laxoleinik(H, half.value_function(), 0.2)
        self.assertTrue(np.allclose(whole.final, again.final, rtol=0, atol=1e-12))

    def test_nonconvex_rejected(self):
        """The p-only bump is not convex"""
        with self.assertRaises(NotConvex):
            solve_laxoleinik(preset("bump_in_p"), cosine, 0.2)

    def test_time_must_be_multiple_of_step(self):
        """t / tau must be an integer"""
        with self.assertRaises(ValueError):
            solve_laxoleinik(preset("free"), cosine, 0.03)


class TestVariationalSolver(unittest.TestCase):
    """Test the min-max solver on graph generating functions"""

    def test_zero_hamiltonian(self):
        """H = 0 leaves f unchanged"""
        H = preset("p_only", qgrid=SMALL_QGRID, coefficients=[0.0, 0.0, 0.0])
        sol = solve_variational(H, cosine, 0.5, steps=2)
        for row in sol.values:
            self.assertTrue(np.array_equal(row, cosine(SMALL_QGRID.nodes())))

    def test_p_only_flat_graph(self):
        """H = h(p) and f = 0 give u(t) = -t h(0)"""
        H = preset("bump_in_p", qgrid=SMALL_QGRID)
        sol = solve_variational(H, lambda q: 0.0, 0.6, steps=3)
        self.assertTrue(np.allclose(sol.values, -sol.times[:, None] * 1.0, rtol=0, atol=1e-12))
        self.assertEqual(sol.metadata["reduction"], "closed_form")

    def test_reduction_is_exact(self):
        """The full action at the critical momenta equals the reduced action"""
        H = preset("pendulum", qgrid=SMALL_QGRID)
        k, tau = 3, 0.05
        full = GraphAction(H, cosine, tau, k, np.ones(2 * k))
        reduced = ReducedGraphAction(H, cosine, tau, k, np.ones(k))
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, 6)
        v = rng.uniform(-0.1, 0.1, (6, k))
        zeta = np.empty((6, 2 * k))
        zeta[:, 0::2] = reduced.momenta(x, v)
        zeta[:, 1::2] = v
        self.assertTrue(np.allclose(full.evaluate(x, zeta), reduced.evaluate(x, v), rtol=0, atol=1e-10))

    def test_dispatch(self):
        """Quadratic fields lose their momenta, p-only fields collapse to one step"""
        pend = graph_action(preset("pendulum", qgrid=SMALL_QGRID), cosine, 0.1, 2)
        self.assertEqual(pend.reduction, "quadratic")
        self.assertEqual(pend.fiber_dim, 2)

        bump = graph_action(preset("bump_in_p", qgrid=SMALL_QGRID), cosine, 0.1, 2)
        self.assertEqual(bump.reduction, "p_only")
        self.assertEqual(bump.fiber_dim, 2)
        self.assertAlmostEqual(bump.tau, 0.1)

        quartic = graph_action(preset("quartic", qgrid=SMALL_QGRID), cosine, 0.1, 2)
        self.assertEqual(quartic.reduction, "none")
        self.assertEqual(quartic.fiber_dim, 4)
        self.assertEqual(quartic.quadratic_matrix().shape, (4, 4))

    def test_matches_laxoleinik_for_convex(self):
        """Pendulum: the two solvers agree"""
        H = preset("pendulum", qgrid=SMALL_QGRID)
        var = solve_variational(H, cosine, 0.1, steps=2, n_fiber=21)
        lo = solve_laxoleinik(H, cosine, 0.1)
        self.assertTrue(np.array_equal(var.initial, cosine(SMALL_QGRID.nodes())))
        self.assertEqual(var.metadata["reduction"], "quadratic")
        self.assertEqual(list(var.times), [0.0, 0.05, 0.1])
        self.assertLessEqual(np.max(np.abs(var.final - lo.final)), 2e-2)

    def test_step_budget(self):
        """More than MAX_K steps is refused"""
        H = preset("pendulum", qgrid=SMALL_QGRID)
        with self.assertRaises(ResolutionBudget):
            solve_variational(H, cosine, 0.1, steps=5)
        with self.assertRaises(ValueError):
            solve_variational(H, cosine, 0.1, steps=0)


class TestExperiments(unittest.TestCase):
    """Test the homogenization experiment and the long-time slope"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_p_only_has_no_oscillation(self):
        """H = h(p): u_k = u-bar for every k"""
        table = homogenization_experiment(preset("free"), cosine, [1, 2], 0.2)
        self.assertEqual(float(np.max(table.errors[0])), 0.0)
        self.assertLessEqual(float(np.max(table.errors[1])), 1e-2)
        self.assertEqual(table.metadata["hbar_backend"], "exact_p_only")

    def test_pendulum_rates_decrease(self):
        """Pendulum with f = 0.1 cos 2 pi q: eps_k decreases over k = 1, 2, 4, 8"""
        table = homogenization_experiment(preset("pendulum"), cosine, [1, 2, 4, 8], 1.0, threads=2)
        self.assertTrue(table.is_decreasing())
        self.assertTrue(np.all(np.isfinite(table.errors)))
        self.assertEqual(table.metadata["hbar_backend"], "levelset")

        path = table.save(self.test_dir / "experiment.csv", config_hash="abc")
        header, df = load_frame(path)
        self.assertEqual(list(df.columns), ["k", "t", "e_k", "eps_k"])
        self.assertEqual(len(df), 4 * len(table.times))
        self.assertEqual(header["kind"], "homogenization_experiment")

    def test_resolution_budget(self):
        """k n_q beyond MAX_EXPERIMENT_NODES is refused before any work"""
        with self.assertRaises(ResolutionBudget):
            homogenization_experiment(preset("pendulum"), cosine, [1, 128], 1.0)

    def test_nonconvex_rejected(self):
        """Only convex fields have a Lax-Oleinik experiment"""
        with self.assertRaises(NotConvex):
            homogenization_experiment(preset("bump_in_p"), cosine, [1], 0.2)
        with self.assertRaises(NotConvex):
            longtime_slope(preset("bump_in_p"), cosine)

    def test_slope_free(self):
        """H = p^2/2 and f = cos 2 pi q: slope 0"""
        wide = MomentumGrid(-8.0, 8.0, 257)
        H = preset("free", pgrid=wide)
        self.assertAlmostEqual(longtime_slope(H, lambda q: np.cos(2 * np.pi * q)), 0.0, delta=5e-2)

    def test_slope_pendulum(self):
        """Pendulum, f = 0: -H-bar(0) = 0"""
        self.assertAlmostEqual(longtime_slope(preset("pendulum"), lambda q: 0.0), 0.0, delta=5e-2)

    def test_slope_shift(self):
        """H = p^2/2 + c: slope -c"""
        H = preset("shifted_free", shift=0.3)
        self.assertAlmostEqual(longtime_slope(H, lambda q: 0.0), -0.3, delta=5e-2)


def run_hj_tests():
    """Run all Hamilton-Jacobi tests"""
    suite = unittest.TestSuite()
    for case in (TestHJSolution, TestLaxOleinikSolver, TestVariationalSolver, TestExperiments):
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(case))
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_hj_tests()
    sys.exit(0 if success else 1)
