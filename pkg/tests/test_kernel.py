from __future__ import annotations

import math
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
from helpers import discrete_example

from chaosweights.dynamics import Trajectory
from chaosweights.errors import FileFormatError, PreconditionError, VersionMismatchError
from chaosweights.kernel import (
    CorrelationSystem,
    KernelConfig,
    build_system,
    correlation_entry,
    correlation_matrix,
    density,
    gaussian_kernel,
    kernel_observable,
    load_system,
    parse_theta_grid,
    save_system,
    theta_scan,
)
from chaosweights.measures import ReferenceMeasure


def spread_measures(count=4, seed=5):
    rng = np.random.default_rng(seed)
    return [
        ReferenceMeasure.atoms(rng.normal(scale=5.0, size=(6, 3)), np.ones(6), f"m{k}")
        for k in range(count)
    ]


class GaussianKernelTest(unittest.TestCase):
    def test_values(self):
        self.assertEqual(gaussian_kernel([1, 2, 3], [1, 2, 3], 5.0), 1.0)
        self.assertAlmostEqual(gaussian_kernel([0, 0, 0], [1, 0, 0], 0.5), math.exp(-1.0))
        self.assertAlmostEqual(gaussian_kernel([0, 0, 0], [2, 0, 0], 2.0), math.exp(-1.0))

    def test_theta_must_be_positive(self):
        with self.assertRaises(PreconditionError):
            gaussian_kernel([0, 0, 0], [1, 0, 0], 0.0)
        with self.assertRaises(PreconditionError):
            KernelConfig(theta=-1.0)

    def test_prefactor(self):
        self.assertEqual(KernelConfig(2.0).scale, 1.0)
        self.assertAlmostEqual(KernelConfig(2.0, prefactor=True).scale, (2 * math.pi) ** 1.5)


class CorrelationTest(unittest.TestCase):
    def test_point_measures(self):
        a = ReferenceMeasure.point([0.0, 0.0, 0.0])
        b = ReferenceMeasure.point([2.0, 0.0, 0.0])
        self.assertEqual(correlation_entry(a, a, 3.0), 1.0)
        self.assertAlmostEqual(correlation_entry(a, b, 1.0), math.exp(-1.0))
        self.assertAlmostEqual(kernel_observable(a, [2.0, 0.0, 0.0], 1.0), math.exp(-1.0))

    def test_matrix_properties(self):
        measures = spread_measures()
        for theta in (1.0, 10.0, 1e4):
            a = correlation_matrix(measures, theta)
            np.testing.assert_array_equal(a, a.T)
            self.assertTrue(np.all((a > 0) & (a <= 1.0 + 1e-12)))
            self.assertGreater(np.min(np.linalg.eigvalsh(a)), -1e-10)
            diag = np.sqrt(np.diag(a))
            self.assertTrue(np.all(a <= np.outer(diag, diag) + 1e-12))

    def test_triangle_of_consistent_entries(self):
        measures = spread_measures(3)
        config = KernelConfig(20.0)
        a = correlation_matrix(measures, config)
        for p in range(3):
            for q in range(3):
                self.assertAlmostEqual(
                    a[p, q], correlation_entry(measures[p], measures[q], config), places=14
                )
                direct = np.mean(kernel_observable(measures[p], measures[q].points, config))
                self.assertAlmostEqual(a[p, q], direct, places=14)

    def test_discrete_overlap(self):
        measures, points, config = discrete_example()
        system = build_system(measures, Trajectory(points, 1.0), config)
        np.testing.assert_allclose(
            system.a,
            [[1 / 3, 2 / 9, 1 / 3], [2 / 9, 1 / 3, 1 / 3], [1 / 3, 1 / 3, 1 / 2]],
            atol=1e-15,
        )
        np.testing.assert_allclose(system.b, [0.25, 0.25, 0.25], atol=1e-15)
        self.assertEqual(system.ids, ["m1", "m2", "m3"])
        self.assertEqual(system.invariant_violations(), [])

    def test_density_of_point(self):
        m = ReferenceMeasure.point([0.0, 0.0, 0.0])
        np.testing.assert_allclose(
            density(m, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], 0.5), [1.0, math.exp(-1.0)]
        )


class BuildSystemTest(unittest.TestCase):
    def setUp(self):
        self.measures = spread_measures(3)
        rng = np.random.default_rng(6)
        self.chaotic = Trajectory(rng.normal(scale=5.0, size=(50, 3)), 2.0)

    def test_b_uses_first_samples(self):
        system = build_system(self.measures, self.chaotic, 10.0, 20, seed=4)
        expected = [np.mean(kernel_observable(m, self.chaotic.states[:20], 10.0)) for m in self.measures]
        np.testing.assert_allclose(system.b, expected, rtol=1e-14)
        self.assertEqual((system.n_samples, system.seed, system.theta), (20, 4, 10.0))

    def test_too_many_samples(self):
        with self.assertRaises(PreconditionError):
            build_system(self.measures, self.chaotic, 10.0, 51)
        with self.assertRaises(PreconditionError):
            build_system([], self.chaotic, 10.0)

    def test_restricted_and_permuted(self):
        system = build_system(self.measures, self.chaotic, 10.0)
        head = system.restricted(2)
        np.testing.assert_array_equal(head.a, system.a[:2, :2])
        self.assertEqual(head.ids, system.ids[:2])
        swapped = system.permuted([2, 0, 1])
        self.assertEqual(swapped.a[0, 0], system.a[2, 2])
        self.assertEqual(swapped.b[1], system.b[0])

    def test_objective(self):
        system = CorrelationSystem(np.eye(2), np.array([1.0, 2.0]), 1.0, 1, 0)
        self.assertEqual(system.objective(np.array([1.0, 2.0])), 0.0)
        self.assertEqual(system.objective(np.zeros(2)), 5.0)

    def test_shape_checks(self):
        with self.assertRaises(PreconditionError):
            CorrelationSystem(np.ones((2, 3)), np.ones(2), 1.0, 1, 0)
        with self.assertRaises(PreconditionError):
            CorrelationSystem(np.eye(2), np.ones(3), 1.0, 1, 0)

    def test_build_checks_the_matrix(self):
        with mock.patch.object(
            CorrelationSystem, "invariant_violations", return_value=["A is not symmetric"]
        ) as check:
            with self.assertLogs("chaosweights.kernel", "WARNING") as logs:
                build_system(self.measures, self.chaotic, KernelConfig(10.0, prefactor=True))
        check.assert_called_once_with(KernelConfig(10.0, prefactor=True).scale)
        self.assertIn("A is not symmetric", logs.output[0])

    def test_violations_are_reported(self):
        bad = CorrelationSystem(np.array([[1.0, 0.9], [0.2, 1.0]]), np.ones(2), 1.0, 1, 0)
        self.assertIn("A is not symmetric", bad.invariant_violations())
        large = CorrelationSystem(np.array([[1.0, 1.5], [1.5, 1.0]]), np.ones(2), 1.0, 1, 0)
        problems = large.invariant_violations()
        self.assertIn("A has entries outside [0, 1]", problems)
        self.assertIn("A is not positive semi-definite", problems)


class ThetaScanTest(unittest.TestCase):
    def test_limits(self):
        measures = spread_measures()
        scan = theta_scan(measures, [1e-4, 1.0, 1e10])
        size = len(measures)
        # Narrow kernels decorrelate distinct measures; wide ones correlate everything.
        self.assertLess(scan.to_ones[-1], 1e-6)
        self.assertAlmostEqual(scan.to_identity[-1], math.sqrt(size * size - size), places=5)
        self.assertGreater(scan.to_ones[0], scan.to_identity[0])
        self.assertTrue(np.all(np.diff(scan.to_ones) <= 1e-12))
        self.assertIn(scan.best, scan.thetas)

    def test_matches_correlation_matrix(self):
        measures = spread_measures(3)
        scan = theta_scan(measures, [3.0, 30.0])
        for theta, to_ones in zip(scan.thetas, scan.to_ones):
            a = correlation_matrix(measures, theta)
            self.assertAlmostEqual(to_ones, np.linalg.norm(a - 1.0), places=12)

    def test_grid_is_sorted(self):
        scan = theta_scan(spread_measures(2), [100.0, 1.0, 10.0])
        np.testing.assert_array_equal(scan.thetas, [1.0, 10.0, 100.0])

    def test_bad_grids(self):
        with self.assertRaises(PreconditionError):
            theta_scan(spread_measures(2), [])
        with self.assertRaises(PreconditionError):
            theta_scan(spread_measures(2), [0.0, 1.0])

    def test_parse_grid(self):
        np.testing.assert_allclose(parse_theta_grid("1e-2:1e2:log5"), [1e-2, 1e-1, 1, 10, 100])
        np.testing.assert_allclose(parse_theta_grid("1:3:3"), [1, 2, 3])
        np.testing.assert_allclose(parse_theta_grid("1,10,100"), [1, 10, 100])
        with self.assertRaises(PreconditionError):
            parse_theta_grid("1:2")
        with self.assertRaises(PreconditionError):
            parse_theta_grid("a,b")


class SystemFileTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "system.txt")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.path, "w") as f:
            f.write(text)

    def test_save_and_load(self):
        measures, points, config = discrete_example()
        system = build_system(measures, Trajectory(points, 1.0), config, seed=7)
        save_system(system, self.path)
        self.assertEqual(load_system(self.path), system)

    def test_missing_b(self):
        self.write("KSYS v1 P=2 theta=1 N=4 seed=0\n1 0\n0 1\n")
        with self.assertRaises(FileFormatError) as cm:
            load_system(self.path)
        self.assertEqual(cm.exception.lineno, 4)

    def test_short_row(self):
        self.write("KSYS v1 P=2 theta=1 N=4 seed=0\n1 0\n0\n1 1\n")
        with self.assertRaises(FileFormatError) as cm:
            load_system(self.path)
        self.assertEqual(cm.exception.lineno, 3)

    def test_version(self):
        self.write("KSYS v0 P=1 theta=1 N=4 seed=0\n1\n1\n")
        with self.assertRaises(VersionMismatchError):
            load_system(self.path)

    def test_header_fields(self):
        self.write("KSYS v1 P=1 N=4 seed=0\n1\n1\n")
        with self.assertRaises(FileFormatError):
            load_system(self.path)


if __name__ == "__main__":
    unittest.main()
