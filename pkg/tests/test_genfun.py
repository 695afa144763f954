"""
Tests for one-step generating functions, composition and discrete actions
"""

import unittest
import tempfile
import shutil
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import root

# Add paths for imports
sys.path.insert(0, str(Path(__file__).parent.parent))
from domain import MomentumGrid, TorusGrid, get_catalog, sample_hamiltonian
from flow import PhasePoint, integrate
from genfun import (
    DiscreteAction,
    POnlyAction,
    ReducedAction,
    action_slice,
    build_Fk,
    compose_gf,
    coupling_matrix,
    coupling_sigma_min,
    dump_slice,
    fiber_box,
    one_step_gf,
    reduce_action,
    reduce_momenta,
)
from shared.errors import GridMismatch, StepTooLarge
from shared.storage import load_frame

QGRID = TorusGrid(64)
PGRID = MomentumGrid(-3.0, 3.0, 129)


def preset(name, **params):
    return get_catalog().build(name, qgrid=QGRID, pgrid=PGRID, **params)


def zero_field():
    return sample_hamiltonian(lambda q, p: 0 * q + 0 * p, QGRID, PGRID, name="zero")


def fd_gradient(fn, x, y, xi, h=1e-6):
    """Central differences of fn in x, y and every fiber component."""
    dx = (fn(x + h, y, xi) - fn(x - h, y, xi)) / (2 * h)
    dy = (fn(x, y + h, xi) - fn(x, y - h, xi)) / (2 * h)
    dxi = np.empty_like(xi)
    for i in range(xi.shape[-1]):
        e = np.zeros(xi.shape[-1])
        e[i] = h
        dxi[..., i] = (fn(x, y, xi + e) - fn(x, y, xi - e)) / (2 * h)
    return dx, dy, dxi


def critical_fiber(F, x, y):
    """Solve d_xi F(x, y; xi) = 0 from the fiber box center."""
    box = fiber_box(F, y)
    sol = root(lambda xi: F.gradient(x, y, xi)[2], box.center, tol=1e-13)
    if not sol.success:
        raise AssertionError(f"fiber-critical solve failed: {sol.message}")
    return sol.x, box


class TestOneStep(unittest.TestCase):
    """Test S = -tau H and its generated map"""

    def test_zero_field_generates_identity(self):
        """H = 0 gives S = 0 and the identity map"""
        S = one_step_gf(zero_field(), 0.1)
        self.assertTrue(np.all(S.table == 0))
        Q, P = S.generated_map(np.array([0.2, 0.7]), np.array([-1.0, 0.5]))
        self.assertTrue(np.allclose(Q, [0.2, 0.7], atol=1e-14))
        self.assertTrue(np.allclose(P, [-1.0, 0.5], atol=1e-14))

    def test_p_only_map_is_exact(self):
        """For h(p) = 1/2 p^2 the generated map is the time-tau flow"""
        S = one_step_gf(preset("free"), 0.05)
        q = np.linspace(0.0, 0.9, 10)
        p = np.linspace(-2.0, 2.0, 10)
        Q, P = S.generated_map(q, p)
        self.assertTrue(np.allclose(Q, q + 0.05 * p, atol=1e-9))
        self.assertTrue(np.allclose(P, p, atol=1e-12))
        self.assertTrue(np.allclose(S.S(q, p), -0.05 * 0.5 * p ** 2, atol=1e-15))

    def test_pendulum_map_close_to_flow(self):
        """Generated map and time-tau flow differ by at most the recorded step error bound"""
        tau = 0.05
        H = preset("pendulum")
        S = one_step_gf(H, tau)
        bound = S.metadata["step_error_bound"]
        worst = 0.0
        for q in np.linspace(0.0, 1.0, 8, endpoint=False):
            for p in np.linspace(-2.0, 2.0, 9):
                Q, P = S.generated_map(q, p)
                end = integrate(H, PhasePoint.at(q, p), tau, dt=1e-3, verify_halving=False).final
                worst = max(worst, float(np.hypot(Q - end.lift_q, P - end.p)))
        self.assertLessEqual(worst, bound)
        self.assertGreater(worst, 0.0)

    def test_compact_support_inherited(self):
        """S vanishes at the momentum edges when H is compactly supported"""
        S = one_step_gf(preset("bump_in_p"), 0.1)
        self.assertTrue(np.all(S.table[:, 0] == 0))
        self.assertTrue(np.all(S.table[:, -1] == 0))

    def test_step_too_large(self):
        """A sheared field with tau * sup|H_qp| >= 0.5 is rejected"""
        with self.assertRaises(StepTooLarge):
            one_step_gf(preset("shear_pendulum"), 1.0)

    def test_nonpositive_step(self):
        """tau must be positive"""
        with self.assertRaises(ValueError):
            one_step_gf(preset("pendulum"), 0.0)


class TestCompose(unittest.TestCase):
    """Test pairwise composition of generating data"""

    def test_zero_composite_is_identity(self):
        """S1 = S2 = 0 has critical fiber q2 = x, p1 = y with value 0"""
        S = one_step_gf(zero_field(), 0.1)
        G = compose_gf(S, S)
        self.assertEqual(G.fiber_dim, 2)
        xi = np.array([0.4, 0.25])
        _, _, dxi = G.gradient(0.25, 0.4, xi)
        self.assertTrue(np.allclose(dxi, 0.0))
        self.assertEqual(float(G.value(0.25, 0.4, xi)), 0.0)

    def test_p_only_composite_value(self):
        """Two steps of -tau h(p) compose to the critical value -2 tau h(y)"""
        tau, y, x = 0.1, 0.8, 0.3
        H = preset("free")
        S = one_step_gf(H, tau)
        G = compose_gf(S, S)
        xi = np.array([y, x - tau * y])
        _, _, dxi = G.gradient(x, y, xi)
        self.assertLess(float(np.max(np.abs(dxi))), 1e-9)
        self.assertAlmostEqual(float(G.value(x, y, xi)), -2 * tau * 0.5 * y ** 2, places=10)

    def test_composite_gradient(self):
        """Exact gradient matches finite differences at 100 random points"""
        rng = np.random.default_rng(3)
        S = one_step_gf(preset("pendulum"), 0.05)
        G = compose_gf(compose_gf(S, S), S)
        self.assertEqual(G.fiber_dim, 4)
        x = rng.uniform(0, 1, 100)
        y = rng.uniform(-2, 2, 100)
        xi = np.column_stack([rng.uniform(-2, 2, 100), rng.uniform(-1, 2, 100),
                              rng.uniform(-2, 2, 100), rng.uniform(-1, 2, 100)])
        analytic = G.gradient(x, y, xi)
        numeric = fd_gradient(G.value, x, y, xi)
        for a, b in zip(analytic, numeric):
            self.assertLess(float(np.max(np.abs(a - b))), 1e-6)

    def test_grid_mismatch(self):
        """Generating data on different grids cannot be composed"""
        S1 = one_step_gf(preset("pendulum"), 0.05)
        other = sample_hamiltonian(lambda q, p: 0.5 * p ** 2 + 0 * q, TorusGrid(32), PGRID)
        with self.assertRaises(GridMismatch):
            compose_gf(S1, one_step_gf(other, 0.05))


class TestDiscreteAction(unittest.TestCase):
    """Test F_k evaluation, gradients and structure"""

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def sample_points(self, F, n=100):
        x = self.rng.uniform(0, 1, n)
        y = self.rng.uniform(-2, 2, n)
        xi = np.empty((n, F.fiber_dim))
        xi[:, 0::2] = self.rng.uniform(-2, 2, (n, F.k - 1))
        xi[:, 1::2] = self.rng.uniform(-0.5, 0.5, (n, F.k - 1))
        return x, y, xi

    def test_k1_is_S(self):
        """F_1(x, y) = S(x, y) with no fiber"""
        S = one_step_gf(preset("pendulum"), 0.05)
        F = build_Fk(S, 1)
        self.assertEqual(F.fiber_dim, 0)
        x = np.linspace(0, 1, 7)
        self.assertTrue(np.allclose(F.value(x, 0.6), S.S(x, 0.6), atol=1e-15))

    def test_fiber_dimension(self):
        """F_k has 2(k-1) fiber variables"""
        S = one_step_gf(preset("pendulum"), 0.05)
        for k in (1, 2, 3, 4):
            self.assertEqual(build_Fk(S, k).fiber_dim, 2 * (k - 1))
        with self.assertRaises(ValueError):
            build_Fk(S, 0)

    def test_gradient_matches_finite_differences(self):
        """Analytic gradient agrees with central differences, rescaled and plain"""
        for name in ("pendulum", "quartic", "shear_pendulum"):
            S = one_step_gf(preset(name), 0.05)
            for k in (2, 3, 4):
                for rescaled in (True, False):
                    F = build_Fk(S, k, rescaled=rescaled)
                    x, y, xi = self.sample_points(F)
                    analytic = F.gradient(x, y, xi)
                    numeric = fd_gradient(F.value, x, y, xi)
                    for a, b in zip(analytic, numeric):
                        self.assertLess(float(np.max(np.abs(a - b))), 1e-6, f"{name} k={k} rescaled={rescaled}")

    def test_gfqi_bound(self):
        """|F_k - Q_k| <= k tau sup|H|"""
        H = preset("pendulum")
        S = one_step_gf(H, 0.05)
        for rescaled in (True, False):
            F = build_Fk(S, 3, rescaled=rescaled)
            x, y, xi = self.sample_points(F, 500)
            gap = np.abs(F.value(x, y, xi) - F.quadratic_part(x, y, xi))
            self.assertLessEqual(float(np.max(gap)), 3 * 0.05 * H.sup_abs + 1e-12)

    def test_p_only_fiber_critical_value(self):
        """For h(p) the fiber-critical value normalizes to h(y) for every k"""
        tau, x, y = 0.05, 0.37, 0.9
        H = preset("p_only", coefficients=[0.0, 0.3, 0.5])
        S = one_step_gf(H, tau)
        h = float(H.evaluate(0.0, y))
        for k in (1, 2, 3, 4):
            for rescaled in (True, False):
                F = build_Fk(S, k, rescaled=rescaled)
                box = fiber_box(F, y)
                _, _, dxi = F.gradient(x, y, box.center)
                if F.fiber_dim:
                    self.assertLess(float(np.max(np.abs(dxi))), 1e-8)
                self.assertAlmostEqual(float(F.normalized(x, y, box.center)), h, places=9)
                self.assertLess(float(np.max(box.radius, initial=0.0)), 1e-12)

    def test_broken_orbit_chain(self):
        """Fiber-critical points of F_3 chain through the one-step map"""
        S = one_step_gf(preset("pendulum"), 0.02)
        F = build_Fk(S, 3)
        x, y = 0.1, 0.4
        xi, _ = critical_fiber(F, x, y)
        r = F.r
        Q1, Q2, Q3 = r * x, r * (x + xi[1]), r * (x + xi[3])
        p1, p2 = xi[0], xi[2]
        Q, P = S.generated_map(Q3, p2)
        self.assertAlmostEqual(float(Q), Q2, places=8)
        self.assertAlmostEqual(float(P), p1, places=8)
        Q, _ = S.generated_map(Q2, p1)
        self.assertAlmostEqual(float(Q), Q1, places=8)


class TestFiberBox(unittest.TestCase):
    """Test fiber bounding boxes"""

    def test_zero_field_box(self):
        """S = 0 gives a zero-radius box"""
        S = one_step_gf(zero_field(), 0.05)
        box = fiber_box(build_Fk(S, 3), 0.5)
        self.assertTrue(np.all(box.radius == 0))
        self.assertEqual(box.gfqi_radius, 0.0)

    def test_sigma_min(self):
        """Tridiagonal spectrum gives the smallest singular value of the coupling"""
        for k in range(2, 7):
            expected = float(np.min(np.linalg.svd(coupling_matrix(k), compute_uv=False)))
            self.assertAlmostEqual(coupling_sigma_min(k), expected, places=12)

    def test_dynamic_radius_within_gfqi_radius(self):
        """Dynamic box stays inside the 2C / sigma_min ball"""
        S = one_step_gf(preset("pendulum"), 0.05)
        for k in (2, 3, 4):
            for y in (0.0, 1.0):
                box = fiber_box(build_Fk(S, k), y)
                self.assertLessEqual(box.norm, box.gfqi_radius)

    def test_box_contains_critical_points(self):
        """Fiber-critical points at several x lie in the box"""
        S = one_step_gf(preset("pendulum"), 0.05)
        for k in (2, 3):
            F = build_Fk(S, k)
            for x in np.linspace(0.0, 1.0, 5, endpoint=False):
                xi, box = critical_fiber(F, x, 0.5)
                self.assertTrue(box.contains(xi, slack=1e-9), f"k={k} x={x}")

    def test_scaled_box(self):
        """Doubling keeps the center"""
        S = one_step_gf(preset("pendulum"), 0.05)
        box = fiber_box(build_Fk(S, 2), 0.0)
        wide = box.scaled(2.0)
        self.assertTrue(np.array_equal(wide.center, box.center))
        self.assertTrue(np.allclose(wide.radius, 2 * box.radius))


class TestReduction(unittest.TestCase):
    """Test stably equivalent reductions"""

    def test_dispatch(self):
        """p-only, quadratic and general fields reduce differently"""
        self.assertIsInstance(reduce_action(build_Fk(one_step_gf(preset("bump_in_p"), 0.05), 3)), POnlyAction)
        self.assertIsInstance(reduce_action(build_Fk(one_step_gf(preset("pendulum"), 0.05), 3)), ReducedAction)
        self.assertIsInstance(reduce_action(build_Fk(one_step_gf(preset("quartic"), 0.05), 3)), DiscreteAction)
        F1 = build_Fk(one_step_gf(preset("pendulum"), 0.05), 1)
        self.assertIs(reduce_action(F1), F1)
        F3 = build_Fk(one_step_gf(preset("pendulum"), 0.05), 3)
        self.assertIs(reduce_action(F3, allow_reduction=False), F3)
        self.assertIsNone(reduce_momenta(build_Fk(one_step_gf(preset("quartic"), 0.05), 3)))

    def test_p_only_action(self):
        """Constant action equals h(y)"""
        H = preset("bump_in_p")
        A = reduce_action(build_Fk(one_step_gf(H, 0.05), 4, rescaled=False))
        for y in (-1.0, 0.0, 0.7):
            self.assertAlmostEqual(float(A.normalized(0.3, y)), float(H.evaluate(0.0, y)), places=12)

    def test_reduced_matches_lift(self):
        """Reduced value equals F_k at the critical momenta, where d_p F_k vanishes"""
        rng = np.random.default_rng(5)
        for name in ("pendulum", "shear_pendulum"):
            F = build_Fk(one_step_gf(preset(name), 0.05), 3)
            R = reduce_action(F)
            x = rng.uniform(0, 1, 50)
            y = rng.uniform(-1.5, 1.5, 50)
            v = rng.uniform(-0.1, 0.1, (50, 2))
            xi = R.lift(x, y, v)
            self.assertTrue(np.allclose(R.value(x, y, v), F.value(x, y, xi), atol=1e-10))
            _, _, dxi = F.gradient(x, y, xi)
            self.assertLess(float(np.max(np.abs(dxi[:, 0::2]))), 1e-8)

    def test_reduced_gradient(self):
        """Reduced gradient agrees with central differences"""
        rng = np.random.default_rng(9)
        for name in ("pendulum", "shear_pendulum"):
            for k in (2, 4):
                R = reduce_action(build_Fk(one_step_gf(preset(name), 0.05), k))
                x = rng.uniform(0, 1, 100)
                y = rng.uniform(-1.5, 1.5, 100)
                v = rng.uniform(-0.1, 0.1, (100, k - 1))
                analytic = R.gradient(x, y, v)
                numeric = fd_gradient(R.value, x, y, v)
                for a, b in zip(analytic, numeric):
                    self.assertLess(float(np.max(np.abs(a - b))), 1e-6, f"{name} k={k}")


class TestSlices(unittest.TestCase):
    """Test principal-axis slices and slice dumps"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_negative_axes(self):
        """Convex quadratic H leaves a concave reduced fiber; the full F_2 has one negative axis"""
        R = reduce_action(build_Fk(one_step_gf(preset("pendulum"), 0.05), 3))
        self.assertEqual(len(action_slice(R, 0.2).negative_axes), 2)
        F = build_Fk(one_step_gf(preset("quartic"), 0.05), 2)
        slc = action_slice(F, 0.2)
        self.assertEqual(len(slc.negative_axes), 1)
        self.assertTrue(np.allclose(slc.axes.T @ slc.axes, np.eye(2)))

    def test_slice_values_at_center(self):
        """eta = 0 evaluates at the box center"""
        F = build_Fk(one_step_gf(preset("quartic"), 0.05), 2)
        slc = action_slice(F, 0.4)
        x = np.array([0.0, 0.5])
        expected = F.normalized(x, 0.4, np.broadcast_to(slc.box.center, (2, 2)))
        self.assertTrue(np.allclose(slc.values(x, np.zeros((2, 2))), expected))

    def test_dump_slice(self):
        """Slice dumps carry x, eta_i and G"""
        R = reduce_action(build_Fk(one_step_gf(preset("pendulum"), 0.05), 2))
        slc = action_slice(R, 0.0)
        path = dump_slice(slc, Path(self.temp_dir) / "slice.csv", n_x=8, n_fiber=5, config_hash="abc")
        header, df = load_frame(path)
        self.assertEqual(list(df.columns), ["x", "eta_1", "G"])
        self.assertEqual(len(df), 40)
        self.assertEqual(header["kind"], "fiber_slice")
        self.assertEqual(header["reduction"], "quadratic")


def run_genfun_tests():
    """Run all generating-function tests"""
    suite = unittest.TestSuite()
    for case in (TestOneStep, TestCompose, TestDiscreteAction, TestFiberBox, TestReduction, TestSlices):
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(case))
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_genfun_tests()
    sys.exit(0 if success else 1)
