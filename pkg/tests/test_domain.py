"""
Tests for grids, sampled fields, presets and field transforms
"""

import unittest
import tempfile
import shutil
import sys
from pathlib import Path

import numpy as np

# Add paths for imports
sys.path.insert(0, str(Path(__file__).parent.parent))
from domain import (
    EffectiveHamiltonian, MomentumGrid, TorusGrid, bump, field_from_table, get_catalog, read_field,
    sample_hamiltonian, shear_conjugate, truncate_coercive, write_field,
)
from flow import PhasePoint, integrate
from shared.errors import DomainTooSmall, GridMismatch, InvalidField, NonPeriodic, RangeExceeded


def pendulum(q, p):
    return 0.5 * p ** 2 - np.sin(np.pi * q) ** 2


class TestGrids(unittest.TestCase):
    """Test grid construction and validation"""

    def test_torus_nodes_exclude_one(self):
        """Torus nodes are j/n and spacing times n is exactly one"""
        grid = TorusGrid(8)
        self.assertEqual(len(grid.nodes()), 8)
        self.assertLess(grid.nodes()[-1], 1.0)
        self.assertEqual(grid.spacing_exact * grid.n_nodes, 1)
        self.assertEqual(int(grid.wrap(9)), 1)

    def test_momentum_grid_validation(self):
        """Momentum grid rejects an empty range"""
        with self.assertRaises(ValueError):
            MomentumGrid(1.0, 1.0, 5)
        grid = MomentumGrid(-1.0, 1.0, 5)
        self.assertAlmostEqual(grid.spacing, 0.5)
        self.assertTrue(grid.covers(1.0))
        self.assertFalse(grid.covers(1.5))


class TestSampleHamiltonian(unittest.TestCase):
    """Test sampling and flag inference"""

    def setUp(self):
        self.qgrid = TorusGrid(64)
        self.pgrid = MomentumGrid(-3.0, 3.0, 129)

    def test_free_particle_flags(self):
        """1/2 p^2 is p-only and convex"""
        h = sample_hamiltonian(lambda q, p: 0.5 * p ** 2 + 0 * q, self.qgrid, self.pgrid)
        self.assertTrue(h.flags.is_p_only)
        self.assertTrue(h.flags.is_convex_in_p)
        self.assertFalse(h.flags.is_compactly_supported)
        self.assertIn("thresholds", h.metadata)

    def test_pendulum_flags(self):
        """The pendulum is convex but not p-only"""
        h = sample_hamiltonian(pendulum, self.qgrid, self.pgrid)
        self.assertFalse(h.flags.is_p_only)
        self.assertTrue(h.flags.is_convex_in_p)
        self.assertTrue(h.flags.is_separable)

    def test_cosine_bump_is_nonconvex(self):
        """cos(2 pi p) times a bump is not convex in p"""
        h = sample_hamiltonian(lambda q, p: np.cos(2 * np.pi * p) * bump(p) + 0 * q, self.qgrid, self.pgrid)
        self.assertFalse(h.flags.is_convex_in_p)
        self.assertTrue(h.flags.is_compactly_supported)

    def test_non_periodic_closure(self):
        """A closure that is not 1-periodic in q is rejected"""
        with self.assertRaises(NonPeriodic):
            sample_hamiltonian(lambda q, p: q + p ** 2, self.qgrid, self.pgrid)

    def test_non_finite_closure(self):
        """Infinite samples raise InvalidField"""
        with self.assertRaises(InvalidField):
            sample_hamiltonian(lambda q, p: np.where(p > 2.0, np.inf, p ** 2) + 0 * q, self.qgrid, self.pgrid)

    def test_interpolation_matches_nodes(self):
        """Interpolation reproduces node values and is second order between nodes"""
        h = sample_hamiltonian(pendulum, self.qgrid, self.pgrid)
        qn, pn = self.qgrid.nodes(), self.pgrid.nodes()
        grid_q, grid_p = np.meshgrid(qn, pn, indexing="ij")
        self.assertTrue(np.allclose(h.interpolate(grid_q, grid_p), h.values, atol=1e-12))

        mid_q = grid_q + 0.5 * self.qgrid.spacing
        mid_p = np.clip(grid_p + 0.5 * self.pgrid.spacing, -3.0, 3.0)
        error = np.max(np.abs(h.interpolate(mid_q, mid_p) - pendulum(mid_q, mid_p)))
        bound = (self.qgrid.spacing ** 2 * 2 * np.pi ** 2 + self.pgrid.spacing ** 2) / 8
        self.assertLessEqual(error, bound * 1.01)

    def test_bicubic_is_more_accurate(self):
        """Bicubic interpolation beats bilinear between nodes"""
        lin = sample_hamiltonian(pendulum, self.qgrid, self.pgrid)
        cub = sample_hamiltonian(pendulum, self.qgrid, self.pgrid, interpolation="bicubic")
        q = np.linspace(0.01, 0.97, 41)
        p = np.linspace(-2.5, 2.5, 41)
        err_lin = np.max(np.abs(lin.interpolate(q, p) - pendulum(q, p)))
        err_cub = np.max(np.abs(cub.interpolate(q, p) - pendulum(q, p)))
        self.assertLess(err_cub, err_lin)

    def test_quadratic_profile(self):
        """Quadratic-in-p structure is detected with and without a closure"""
        h = sample_hamiltonian(pendulum, self.qgrid, self.pgrid)
        profile = h.quadratic_profile
        self.assertIsNotNone(profile)
        self.assertAlmostEqual(profile.a, 1.0, places=12)
        V = h.mechanical_potential()
        self.assertAlmostEqual(float(V(np.array(0.5))), 1.0, places=12)

        table_only = field_from_table(h.values, self.qgrid, self.pgrid)
        self.assertAlmostEqual(table_only.quadratic_profile.a, 1.0, places=8)

        quartic = sample_hamiltonian(lambda q, p: 0.25 * p ** 4 + 0 * q, self.qgrid, self.pgrid)
        self.assertIsNone(quartic.quadratic_profile)
        self.assertIsNone(quartic.mechanical_potential())

    def test_arithmetic_requires_same_grids(self):
        """Adding fields on different grids raises GridMismatch"""
        a = sample_hamiltonian(pendulum, self.qgrid, self.pgrid)
        b = sample_hamiltonian(pendulum, TorusGrid(32), self.pgrid)
        with self.assertRaises(GridMismatch):
            a + b
        doubled = a + a
        self.assertTrue(np.allclose(doubled.values, 2 * a.values))
        self.assertTrue(np.allclose((-a).values, -a.values))

    def test_time_dependent_sampling(self):
        """Time slices are stored and evaluated"""
        h = sample_hamiltonian(lambda t, q, p: (1 + np.cos(2 * np.pi * t)) * 0.5 * p ** 2 + 0 * q,
                               self.qgrid, self.pgrid, time_slices=8)
        self.assertFalse(h.is_autonomous)
        self.assertEqual(h.time_slices.shape, (8, 64, 129))
        self.assertAlmostEqual(float(h.evaluate(0.3, 1.0, t=0.5)), 0.0, places=12)


class TestTransforms(unittest.TestCase):
    """Test truncation and shear conjugation"""

    def setUp(self):
        self.qgrid = TorusGrid(64)
        self.pgrid = MomentumGrid(-3.0, 3.0, 129)
        self.free = sample_hamiltonian(lambda q, p: 0.5 * p ** 2 + 0 * q, self.qgrid, self.pgrid)

    def test_truncate_free_particle(self):
        """Truncation keeps 1/2 p^2 on |p| <= 1 and vanishes on |p| >= 2"""
        t = truncate_coercive(self.free, 1.0)
        pn = self.pgrid.nodes()
        inner = np.abs(pn) <= 1.0
        outer = np.abs(pn) >= 2.0
        self.assertTrue(np.array_equal(t.values[:, inner], self.free.values[:, inner]))
        self.assertTrue(np.all(t.values[:, outer] == 0.0))
        self.assertTrue(t.flags.is_compactly_supported)

    def test_truncate_is_idempotent(self):
        """Truncating twice at the same A is a no-op"""
        t = truncate_coercive(self.free, 1.0)
        self.assertIs(truncate_coercive(t, 1.0), t)

    def test_truncate_zero(self):
        """The zero field truncates to zero"""
        zero = sample_hamiltonian(lambda q, p: 0 * q + 0 * p, self.qgrid, self.pgrid)
        self.assertTrue(np.all(truncate_coercive(zero, 1.0).values == 0.0))

    def test_truncate_keeps_sublevel_flow(self):
        """Pendulum truncated at A=2: orbits started in {H <= 1} follow the untruncated flow"""
        pgrid = MomentumGrid(-5.0, 5.0, 161)
        H = sample_hamiltonian(pendulum, self.qgrid, pgrid, name="pendulum")
        t = truncate_coercive(H, 2.0)
        for q0, p0 in ((0.25, 0.0), (0.1, -1.0), (0.6, 1.2), (0.5, 1.9)):
            self.assertLessEqual(float(pendulum(q0, p0)), 1.0)
            a = integrate(H, PhasePoint.at(q0, p0), 1.0, dt=1e-3, verify_halving=False)
            b = integrate(t, PhasePoint.at(q0, p0), 1.0, dt=1e-3, verify_halving=False)
            self.assertLessEqual(float(np.max(np.abs(a.lift_q - b.lift_q))), 1e-8, (q0, p0))
            self.assertLessEqual(float(np.max(np.abs(a.p - b.p))), 1e-8, (q0, p0))

    def test_truncate_domain_too_small(self):
        """Cutoff support beyond the grid raises DomainTooSmall"""
        with self.assertRaises(DomainTooSmall):
            truncate_coercive(self.free, 2.0)

    def test_shear_identity(self):
        """A zero shear returns the field unchanged"""
        self.assertIs(shear_conjugate(self.free, lambda q: 0 * q, lambda q: 0 * q), self.free)

    def test_shear_free_particle(self):
        """Shearing 1/2 p^2 gives 1/2 (p + f'(q))^2"""
        f = lambda q: 0.1 * np.sin(2 * np.pi * q) / (2 * np.pi)
        df = lambda q: 0.1 * np.cos(2 * np.pi * q)
        s = shear_conjugate(self.free, f, df)
        grid_q, grid_p = np.meshgrid(self.qgrid.nodes(), self.pgrid.nodes(), indexing="ij")
        expected = 0.5 * (grid_p + 0.1 * np.cos(2 * np.pi * grid_q)) ** 2
        self.assertTrue(np.allclose(s.values, expected, atol=1e-12))

    def test_shear_round_trip_on_table(self):
        """Shearing by f then -f returns a table-only field within interpolation error"""
        h = sample_hamiltonian(lambda q, p: bump(p) + 0 * q, self.qgrid, self.pgrid)
        table = field_from_table(h.values, self.qgrid, self.pgrid)
        f = lambda q: 0.1 * np.sin(2 * np.pi * q) / (2 * np.pi)
        df = lambda q: 0.1 * np.cos(2 * np.pi * q)
        back = shear_conjugate(shear_conjugate(table, f, df), lambda q: -f(q), lambda q: -df(q))
        bound = 2 * table.derivative_bounds["dpp"] * self.pgrid.spacing ** 2
        self.assertLessEqual(np.max(np.abs(back.values - table.values)), bound)

    def test_shear_range_exceeded(self):
        """A table-only field without compact support cannot be sheared off the grid"""
        table = field_from_table(self.free.values, self.qgrid, self.pgrid)
        with self.assertRaises(RangeExceeded):
            shear_conjugate(table, lambda q: 0.1 * np.sin(2 * np.pi * q), lambda q: 0.2 * np.pi * np.cos(2 * np.pi * q))


class TestPresets(unittest.TestCase):
    """Test the preset catalog"""

    def test_every_preset_builds_with_truthful_flags(self):
        """All declared presets sample and pass their flag claims"""
        catalog = get_catalog()
        qgrid, pgrid = TorusGrid(32), MomentumGrid(-3.0, 3.0, 65)
        for name in catalog.names():
            with self.subTest(preset=name):
                h = catalog.build(name, qgrid=qgrid, pgrid=pgrid)
                self.assertEqual(h.name, name)

    def test_unknown_preset(self):
        """Unknown presets raise ValueError"""
        with self.assertRaises(ValueError):
            get_catalog().build("no_such_preset")

    def test_false_claim_detected(self):
        """A wrong flag claim is reported"""
        catalog = get_catalog()
        h = catalog.pendulum(qgrid=TorusGrid(16), pgrid=MomentumGrid(-2.0, 2.0, 33))
        with self.assertRaises(InvalidField):
            catalog.verify_flags(h, {"is_p_only": True})

    def test_p_only_constructor(self):
        """p_only accepts a callable profile or polynomial coefficients"""
        catalog = get_catalog()
        grids = {"qgrid": TorusGrid(16), "pgrid": MomentumGrid(-2.0, 2.0, 33)}
        a = catalog.p_only(lambda p: np.cos(p), **grids)
        b = catalog.p_only([1.0, 0.0, -0.5], **grids)
        self.assertTrue(a.flags.is_p_only and b.flags.is_p_only)
        self.assertAlmostEqual(float(b.values[3, 16]), 1.0)


class TestFieldFiles(unittest.TestCase):
    """Test field serialization"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_write_then_read(self):
        """A written field reads back with the same table and flags"""
        h = sample_hamiltonian(pendulum, TorusGrid(16), MomentumGrid(-2.0, 2.0, 33), name="pendulum")
        path = write_field(h, Path(self.temp_dir) / "pendulum.csv", config_hash="abc")
        back = read_field(path)
        self.assertTrue(np.allclose(back.values, h.values, rtol=1e-11, atol=1e-12))
        self.assertEqual(back.flags, h.flags)
        self.assertEqual(back.name, "pendulum")


class TestEffectiveHamiltonian(unittest.TestCase):
    """Test sampled effective Hamiltonians"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.pgrid = MomentumGrid(-2.0, 2.0, 41)

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def curve(self, fn, backend="levelset", **extra):
        return EffectiveHamiltonian(self.pgrid, fn(self.pgrid.nodes()), backend, **extra)

    def test_lipschitz_and_distances(self):
        """Slopes, sup and L1 distances on a shared grid"""
        a = self.curve(lambda p: 0.5 * p ** 2)
        b = self.curve(lambda p: 0.5 * p ** 2 + 0.1)
        self.assertAlmostEqual(a.lipschitz_constant(), 1.95, places=10)
        self.assertAlmostEqual(a.sup_distance(b), 0.1, places=12)
        self.assertAlmostEqual(a.l1_distance(b), 0.4, places=10)
        self.assertLessEqual(a.max_jump(), a.lipschitz_constant() * self.pgrid.spacing + 1e-12)

    def test_rejects_unknown_backend_and_shape(self):
        """Backend names and value counts are checked"""
        with self.assertRaises(ValueError):
            self.curve(np.abs, backend="magic")
        with self.assertRaises(ValueError):
            EffectiveHamiltonian(self.pgrid, np.zeros(5), "levelset")

    def test_as_field_is_p_only(self):
        """The curve as a field is p-only with row h"""
        a = self.curve(np.cos)
        H = a.as_field(TorusGrid(8))
        self.assertTrue(H.flags.is_p_only)
        self.assertTrue(np.array_equal(H.row(), a.values))

    def test_save_and_load(self):
        """Curves persist as CSV plus JSON metadata"""
        a = self.curve(np.sin, backend="minmax", k=2, tau=0.02, error_estimate=0.01,
                       c_minus=np.sin(self.pgrid.nodes()) - 0.1, c_plus=np.sin(self.pgrid.nodes()))
        path = a.save(Path(self.temp_dir) / "curve.csv", config_hash="abc")
        self.assertTrue(path.with_suffix(".json").exists())
        back = EffectiveHamiltonian.load(path)
        self.assertEqual(back.backend, "minmax")
        self.assertEqual(back.k, 2)
        self.assertTrue(np.allclose(back.values, a.values, atol=1e-12))
        self.assertTrue(np.allclose(back.c_minus, a.c_minus, atol=1e-12))
        self.assertAlmostEqual(back.error_estimate, 0.01)
        self.assertIsNone(self.curve(np.sin).c_plus)


def run_domain_tests():
    """Run all domain tests"""
    suite = unittest.TestSuite()
    for case in (TestGrids, TestSampleHamiltonian, TestTransforms, TestPresets, TestFieldFiles,
                 TestEffectiveHamiltonian):
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(case))
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_domain_tests()
    sys.exit(0 if success else 1)
