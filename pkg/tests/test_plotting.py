from __future__ import annotations

import os
import tempfile
import unittest

from chaosweights.errors import PreconditionError
from chaosweights.plotting import plot_weight_distribution


class WeightDistributionPlotTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_rows_of_growing_length(self):
        table = {1: [1.0], 2: [0.7, 0.3], 3: [0.9, 0.4, -0.3]}
        plot_weight_distribution(table, self.path("d.svg"), label="lsw")
        with open(self.path("d.svg")) as f:
            self.assertIn("<svg", f.read())

    def test_same_figure_twice(self):
        table = {2: [0.5, 0.5], 3: [0.2, 0.3, 0.5]}
        plot_weight_distribution(table, self.path("a.svg"))
        plot_weight_distribution(table, self.path("b.svg"))
        with open(self.path("a.svg")) as a, open(self.path("b.svg")) as b:
            self.assertEqual(a.read(), b.read())

    def test_nothing_to_draw(self):
        with self.assertRaises(PreconditionError):
            plot_weight_distribution({}, self.path("d.svg"))
        self.assertFalse(os.path.exists(self.path("d.svg")))


if __name__ == "__main__":
    unittest.main()
