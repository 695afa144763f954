"""
Tests for sublevel complexes, min-max values and spectral invariants
"""

import unittest
import tempfile
import shutil
import sys
from pathlib import Path

import numpy as np

# Add paths for imports
sys.path.insert(0, str(Path(__file__).parent.parent))
from domain import MomentumGrid, TorusGrid, get_catalog, sample_hamiltonian
from genfun import build_Fk, one_step_gf
from minmax import (
    FUNDAMENTAL,
    UNIT,
    SublevelComplex,
    brute_cycle_oracle,
    c_pm_iterates,
    c_value,
    class_values,
    estimate_cells,
    gfqi_field,
    hk_curve,
    map_invariants,
    normalize_class,
    spectral_invariants,
)
from shared.errors import ResolutionBudget
from shared.storage import load_frame
from weakkam import levelset_curve

QGRID = TorusGrid(64)
PGRID = MomentumGrid(-3.0, 3.0, 129)
TAU = 0.05


def preset(name, **params):
    return get_catalog().build(name, qgrid=QGRID, pgrid=PGRID, **params)


def zero_field():
    return sample_hamiltonian(lambda q, p: 0 * q + 0 * p, QGRID, PGRID, name="zero")


def random_complex(rng, shape=(6, 5, 5), levels=6):
    """Integer-valued complex over the circle times two fiber axes, random negative axes."""
    m = int(rng.integers(0, 3))
    negative = tuple(sorted(rng.choice([1, 2], size=m, replace=False).tolist()))
    values = rng.integers(0, levels, size=shape).astype(float)
    return SublevelComplex.from_vertex_values(values, periodic_axes=(0,), negative_axes=negative)


def circle_values(a, n=32):
    x = np.arange(n) / n
    return a + np.cos(2 * np.pi * x)


class TestSublevelComplex(unittest.TestCase):
    """Test the doubled lattice and its filtration"""

    def test_faces_never_exceed_cells(self):
        """Lower-star values are monotone along the face poset"""
        rng = np.random.default_rng(3)
        cx = random_complex(rng, shape=(4, 3, 3))
        flat_values = cx.cell_values.ravel()
        for cell in range(cx.n_cells):
            for face in cx.faces(cell):
                self.assertLessEqual(flat_values[face], flat_values[cell])

    def test_doubled_shape_and_exit_set(self):
        """Periodic axes double, others gain odd length; negative walls are exit cells"""
        cx = SublevelComplex.from_vertex_values(np.zeros((4, 5)), negative_axes=(1,))
        self.assertEqual(cx.shape2, (8, 9))
        self.assertEqual(cx.n_cells, estimate_cells(4, [5]))
        self.assertTrue(np.all(cx.exit_mask[:, 0]))
        self.assertTrue(np.all(cx.exit_mask[:, 8]))
        self.assertFalse(np.any(cx.exit_mask[:, 1:8]))

    def test_degrees(self):
        """Unit sits in the negative index, fundamental one above"""
        cx = SublevelComplex.from_vertex_values(np.zeros((4, 3, 3)), negative_axes=(2,))
        self.assertEqual(cx.degree(UNIT), 1)
        self.assertEqual(cx.degree(FUNDAMENTAL), 2)
        self.assertEqual(cx.positive_axes, (1,))

    def test_class_aliases(self):
        """Class names accept the usual aliases"""
        self.assertEqual(normalize_class("1"), UNIT)
        self.assertEqual(normalize_class("mu"), FUNDAMENTAL)
        with self.assertRaises(ValueError):
            normalize_class("top")

    def test_invalid_complexes(self):
        """Periodic negative axes and non-finite values are rejected"""
        with self.assertRaises(ValueError):
            SublevelComplex.from_vertex_values(np.zeros((4, 3)), periodic_axes=(0, 1), negative_axes=(1,))
        with self.assertRaises(ValueError):
            SublevelComplex.from_vertex_values(np.array([0.0, np.nan, 1.0]))


class TestCValue(unittest.TestCase):
    """Test c_value against closed forms and the brute-force oracle"""

    def test_circle_morse_function(self):
        """a + cos(2 pi x) on the circle: unit gives the min, fundamental the max"""
        a = 0.4
        cx = SublevelComplex.from_vertex_values(circle_values(a))
        self.assertAlmostEqual(c_value(cx, UNIT), a - 1.0, places=12)
        self.assertAlmostEqual(c_value(cx, FUNDAMENTAL), a + 1.0, places=12)
        self.assertAlmostEqual(brute_cycle_oracle(cx, UNIT), a - 1.0, places=12)
        self.assertAlmostEqual(brute_cycle_oracle(cx, FUNDAMENTAL), a + 1.0, places=12)

    def test_constant_function(self):
        """A constant gives the constant for both classes"""
        cx = SublevelComplex.from_vertex_values(np.full((6, 5, 5), 2.5), negative_axes=(1,))
        self.assertEqual(class_values(cx), [2.5, 2.5])
        self.assertEqual(brute_cycle_oracle(cx, UNIT), 2.5)
        self.assertEqual(brute_cycle_oracle(cx, FUNDAMENTAL), 2.5)

    def test_negative_fiber_keeps_circle_values(self):
        """cos(2 pi x) - eta^2 with eta negative: values of the circle, degrees shifted"""
        x = np.arange(16) / 16
        eta = np.linspace(-2.0, 2.0, 9)
        values = np.cos(2 * np.pi * x)[:, None] - eta[None, :] ** 2
        cx = SublevelComplex.from_vertex_values(values, negative_axes=(1,))
        self.assertAlmostEqual(c_value(cx, UNIT), -1.0, places=12)
        self.assertAlmostEqual(c_value(cx, FUNDAMENTAL), 1.0, places=12)
        self.assertAlmostEqual(brute_cycle_oracle(cx, UNIT), -1.0, places=12)

    def test_random_complexes_match_oracle(self):
        """c_value equals the oracle exactly on 50 random complexes"""
        rng = np.random.default_rng(20240601)
        for trial in range(50):
            cx = random_complex(rng)
            for cls in (UNIT, FUNDAMENTAL):
                with self.subTest(trial=trial, cls=cls, negative=cx.negative_axes):
                    self.assertEqual(c_value(cx, cls), brute_cycle_oracle(cx, cls))

    def test_unit_below_fundamental(self):
        """c(unit) <= c(fundamental) and both are vertex values"""
        rng = np.random.default_rng(11)
        for _ in range(10):
            cx = random_complex(rng)
            lo, hi = class_values(cx)
            self.assertLessEqual(lo, hi)
            self.assertIn(lo, set(cx.values.ravel().tolist()))
            self.assertIn(hi, set(cx.values.ravel().tolist()))

    def test_monotone_in_values(self):
        """Raising vertex values never lowers a min-max value"""
        rng = np.random.default_rng(5)
        for _ in range(10):
            cx = random_complex(rng)
            bump = rng.integers(0, 3, size=cx.values.shape).astype(float)
            higher = SublevelComplex(values=cx.values + bump, periodic=cx.periodic,
                                     negative_axes=cx.negative_axes)
            for cls in (UNIT, FUNDAMENTAL):
                self.assertLessEqual(c_value(cx, cls), c_value(higher, cls))

    def test_oracle_cell_limit(self):
        """The oracle refuses complexes beyond its cell limit"""
        cx = SublevelComplex.from_vertex_values(np.zeros((40, 15, 15)), negative_axes=(1,))
        with self.assertRaises(ValueError):
            brute_cycle_oracle(cx, UNIT)


class TestSpectralInvariants(unittest.TestCase):
    """Test invariants of discrete actions"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_p_only_gives_h(self):
        """p-only h: (h(y), h(y), 0) for every k"""
        H = preset("p_only")
        S = one_step_gf(H, TAU)
        for k in (1, 2, 3):
            for y in (-1.0, 0.5, 1.3):
                inv = spectral_invariants(build_Fk(S, k), y)
                expected = float(H.evaluate(0.0, y))
                self.assertAlmostEqual(inv.c_minus, expected, places=10)
                self.assertAlmostEqual(inv.c_plus, expected, places=10)
                self.assertAlmostEqual(inv.gamma, 0.0, places=12)

    def test_zero_field(self):
        """H = 0 gives (0, 0, 0), reduced or not"""
        S = one_step_gf(zero_field(), TAU)
        for reduce in (True, False):
            inv = spectral_invariants(build_Fk(S, 1), 0.7, reduce=reduce)
            self.assertEqual((inv.c_minus, inv.c_plus, inv.gamma), (0.0, 0.0, 0.0))

    def test_pendulum_two_steps(self):
        """Pendulum k=2, y=0: positive gap, values inside the energy range of the tube"""
        H = preset("pendulum")
        inv = spectral_invariants(build_Fk(one_step_gf(H, TAU), 2), 0.0)
        self.assertGreater(inv.gamma, 0.0)
        self.assertGreaterEqual(inv.c_minus, -1.0 - inv.error_estimate)
        self.assertLessEqual(inv.c_plus, float(np.max(H.evaluate(QGRID.nodes(), 0.0))) + 0.5)
        self.assertEqual(inv.metadata["reduction"], "quadratic")

    def test_first_step_is_max_over_circle(self):
        """k = 1: c(fundamental) is the max of H over the circle at y"""
        H = preset("pendulum")
        inv = spectral_invariants(build_Fk(one_step_gf(H, TAU), 1), 0.5, n_base=64)
        q = np.arange(64) / 64
        self.assertAlmostEqual(inv.c_plus, float(np.max(H.evaluate(q, np.full(64, 0.5)))), places=12)
        self.assertAlmostEqual(inv.c_minus, float(np.min(H.evaluate(q, np.full(64, 0.5)))), places=12)

    def test_resolution_budget(self):
        """An unreduced k=4 action would need too many cells"""
        F = build_Fk(one_step_gf(preset("pendulum"), TAU), 4)
        with self.assertRaises(ResolutionBudget):
            spectral_invariants(F, 0.0, reduce=False)

    def test_map_invariants_p_only(self):
        """Map level: min and max of h over the momenta"""
        H = preset("bump_in_p")
        ys = np.linspace(-2.0, 2.0, 17)
        inv = map_invariants(build_Fk(one_step_gf(H, TAU), 1), ys)
        h = H.evaluate(np.zeros_like(ys), ys)
        self.assertAlmostEqual(inv.c_plus, float(np.max(h)), places=10)
        self.assertAlmostEqual(inv.c_minus, float(np.min(h)), places=10)

    def test_hk_curve_p_only(self):
        """h_k = h on a p-only field"""
        H = preset("p_only")
        pgrid = MomentumGrid(-1.0, 1.0, 9)
        curve = hk_curve(build_Fk(one_step_gf(H, TAU), 2), pgrid)
        expected = H.evaluate(np.zeros(9), pgrid.nodes())
        self.assertTrue(np.allclose(curve.values, expected, atol=1e-10))
        self.assertEqual(curve.backend, "minmax")
        self.assertEqual(curve.k, 2)

    def test_hk_curve_lipschitz(self):
        """Pendulum h_2 slopes stay within the momentum-derivative bound"""
        H = preset("pendulum")
        pgrid = MomentumGrid(-1.5, 1.5, 7)
        curve = hk_curve(build_Fk(one_step_gf(H, TAU), 2), pgrid, n_fiber=5, threads=2)
        bound = 1.1 * (H.sup_dp((-1.5, 1.5)) + 2 * curve.error_estimate / pgrid.spacing)
        self.assertLessEqual(curve.lipschitz_constant(), bound)
        self.assertTrue(np.all(curve.c_minus <= curve.c_plus))

        path = curve.save(Path(self.temp_dir) / "h2.csv", config_hash="abc")
        header, df = load_frame(path)
        self.assertEqual(list(df.columns), ["p", "h", "c_minus", "c_plus"])
        self.assertEqual(header["backend"], "minmax")

    def test_c_pm_p_only(self):
        """(1/k) c+ is sup h and (1/k) c- is inf h at every k"""
        H = preset("bump_in_p")
        seq = c_pm_iterates(H, 3, tau=TAU)
        h = H.evaluate(np.zeros(PGRID.n_nodes), PGRID.nodes())
        for value in seq.c_plus:
            self.assertAlmostEqual(value, float(np.max(h)), places=10)
        for value in seq.c_minus:
            self.assertAlmostEqual(value, float(np.min(h)), places=10)
        self.assertAlmostEqual(seq.limit_plus, float(np.max(h)), places=9)

        path = seq.save(Path(self.temp_dir) / "cpm.csv")
        header, df = load_frame(path)
        self.assertEqual(header["kind"], "c_pm_iterates")
        self.assertEqual(len(df), 3)

    def test_c_pm_pendulum_trend(self):
        """Pendulum at tau = 0.25: (1/k) c+ moves toward sup H-bar and ends within twice its error"""
        H = preset("pendulum")
        ys = MomentumGrid(-1.5, 1.5, 7)
        seq = c_pm_iterates(H, 4, tau=0.25, ys=ys, n_fiber=9)
        sup_h = float(np.max(levelset_curve(H, ys).values))
        gaps = np.abs(seq.c_plus - sup_h)
        self.assertLess(gaps[-1], gaps[0])
        self.assertLessEqual(gaps[-1], 2 * seq.error_estimates[-1])
        self.assertTrue(np.all(seq.c_minus <= seq.c_plus + 1e-12))

    def test_unreduced_anti_symmetry(self):
        """Full F_2 of a p-only field and of its negative: h_2(-H) = -h_2(H) within the error estimates"""
        H = preset("bump_in_p")
        pgrid = MomentumGrid(-1.0, 1.0, 5)
        up = hk_curve(build_Fk(one_step_gf(H, TAU), 2), pgrid, reduce=False)
        down = hk_curve(build_Fk(one_step_gf(-H, TAU), 2), pgrid, reduce=False)
        self.assertEqual(up.metadata["reduction"], "none")
        residual = float(np.max(np.abs(up.values + down.values)))
        self.assertLessEqual(residual, up.error_estimate + down.error_estimate + 1e-12)
        expected = H.evaluate(np.zeros(5), pgrid.nodes())
        self.assertTrue(np.allclose(up.values, expected, atol=up.error_estimate + 1e-12))

    def test_c_pm_budget(self):
        """k_max beyond the feasible envelope is refused"""
        with self.assertRaises(ResolutionBudget):
            c_pm_iterates(preset("pendulum"), 5)

    def test_gfqi_field(self):
        """Quadratic fields pass through, other coercive fields are truncated"""
        pendulum = preset("pendulum")
        self.assertIs(gfqi_field(pendulum), pendulum)
        truncated = gfqi_field(preset("quartic"))
        self.assertEqual(truncated.metadata["truncated_at"], 1.5)
        self.assertTrue(truncated.flags.is_compactly_supported)


def run_minmax_tests():
    """Run all min-max tests"""
    suite = unittest.TestSuite()
    for case in (TestSublevelComplex, TestCValue, TestSpectralInvariants):
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(case))
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_minmax_tests()
    sys.exit(0 if success else 1)
