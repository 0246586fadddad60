from __future__ import annotations

import math
import unittest

import numpy as np
from helpers import AB_GUESS

from chaosweights.dynamics import Params, integrate, mirror
from chaosweights.errors import DegenerateSolutionError, NonPrimitiveOrbitError, PreconditionError
from chaosweights.measures import ReferenceMeasure, measure_average
from chaosweights.observables import get_observable
from chaosweights.orbits import (
    PeriodicOrbit,
    floquet,
    orbit_samples,
    refine_orbit,
    scan_recurrences,
    symbol_sequence,
    z_maxima,
)

P = Params()


class ShortestOrbitTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.orbit = refine_orbit(AB_GUESS, P)

    def test_symbol_and_period(self):
        self.assertEqual(self.orbit.symbol, "AB")
        self.assertEqual(self.orbit.id, "AB")
        self.assertAlmostEqual(self.orbit.period, 1.5587, delta=1e-3)

    def test_closes_under_independent_integration(self):
        self.assertLess(self.orbit.closure_residual(P), 1e-7)

    def test_floquet_data(self):
        lam, multipliers = floquet(self.orbit, P)
        self.assertGreater(lam, 0)
        self.assertAlmostEqual(lam, self.orbit.floquet_exponent, places=8)
        self.assertEqual(len(multipliers), 3)
        self.assertAlmostEqual(multipliers[1], 1.0, delta=1e-4)
        expected = math.exp(P.divergence * self.orbit.period)
        self.assertAlmostEqual(np.prod(multipliers) / expected, 1.0, delta=1e-4)

    def test_symmetric_orbit_is_its_own_mirror(self):
        self.assertTrue(self.orbit.is_symmetric)
        self.assertEqual(self.orbit.mirrored().symbol, "AB")

    def test_refining_the_mirror_image(self):
        image = refine_orbit((mirror(self.orbit.nodes[0]), self.orbit.period), P)
        self.assertEqual(image.symbol, "AB")
        self.assertAlmostEqual(image.period / self.orbit.period, 1.0, delta=1e-6)
        self.assertAlmostEqual(
            image.floquet_exponent / self.orbit.floquet_exponent, 1.0, delta=1e-6
        )

    def test_samples_have_uniform_phase(self):
        samples = orbit_samples(self.orbit, P)
        self.assertLessEqual(self.orbit.period / len(samples), 0.01)
        np.testing.assert_array_equal(samples[0], self.orbit.nodes[0])
        self.assertIs(samples, orbit_samples(self.orbit, P))

    def test_z_maxima_count_matches_symbol_length(self):
        self.assertEqual(len(z_maxima(orbit_samples(self.orbit, P), cyclic=True)), 2)

    def test_average_against_finer_quadrature(self):
        z = get_observable("z")
        coarse = measure_average(ReferenceMeasure.from_orbit(self.orbit, P), z)
        fine = measure_average(ReferenceMeasure.from_orbit(self.orbit, P, 0.001), z)
        self.assertAlmostEqual(coarse / fine, 1.0, delta=1e-6)

    def test_orbit_traversed_twice_is_not_prime(self):
        doubled = PeriodicOrbit(
            id="ABAB",
            nodes=np.concatenate([self.orbit.nodes, self.orbit.nodes]),
            node_times=np.concatenate(
                [self.orbit.node_times, self.orbit.node_times + self.orbit.period]
            ),
            period=2 * self.orbit.period,
            symbol="ABAB",
            floquet_exponent=self.orbit.floquet_exponent,
            multipliers=self.orbit.multipliers,
        )
        with self.assertRaises(NonPrimitiveOrbitError):
            symbol_sequence(doubled, P)

    def test_recurrence_scan_on_the_orbit(self):
        traj = integrate(self.orbit.nodes[0], P, 3 * self.orbit.period, 0.01)
        guesses = scan_recurrences(traj, 0.5, 1.0, 2.0)
        self.assertTrue(guesses)
        self.assertTrue(any(abs(g.period - self.orbit.period) < 0.02 for g in guesses))


class RefinementErrorsTest(unittest.TestCase):
    def test_equilibrium_guess(self):
        c = math.sqrt(72.0)
        with self.assertRaises(DegenerateSolutionError):
            refine_orbit((np.array([c, c, 27.0]), 1.0), P)

    def test_non_positive_period(self):
        with self.assertRaises(PreconditionError):
            refine_orbit((AB_GUESS[0], 0.0), P)


class RecurrenceScanTest(unittest.TestCase):
    def test_window_order(self):
        traj = integrate([1.0, 1.0, 1.0], P, 10.0, 0.01)
        with self.assertRaises(PreconditionError):
            scan_recurrences(traj, 0.5, 2.0, 1.0)

    def test_trajectory_too_short(self):
        traj = integrate([1.0, 1.0, 1.0], P, 1.0, 0.01)
        with self.assertRaises(PreconditionError):
            scan_recurrences(traj, 0.5, 0.5, 2.0)


if __name__ == "__main__":
    unittest.main()
