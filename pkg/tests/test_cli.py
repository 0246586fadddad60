from __future__ import annotations

import io
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
from helpers import discrete_example, synthetic_library

from chaosweights.config import CONFIG_HOME_VARIABLE
from chaosweights.dynamics import Trajectory
from chaosweights.entry_points.run_chaosweights import create_parser, main
from chaosweights.experiments import NOT_COMPLETE
from chaosweights.kernel import build_system, save_system
from chaosweights.library import save_library
from chaosweights.weights import load_weights


class CommandLineTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        patcher = mock.patch.dict(
            os.environ, {CONFIG_HOME_VARIABLE: self.tmp.name, "NO_COLOR": "1"}
        )
        patcher.start()
        self.addCleanup(patcher.stop)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        status = main(list(argv), stdout=stdout, stderr=stderr)
        return status, stdout.getvalue(), stderr.getvalue()

    def test_uniform_weights(self):
        status, out, err = self.run_cli("weights", "--method", "uniform", "--P", "4", "--out", self.path("w.txt"))
        self.assertEqual(status, 0, err)
        np.testing.assert_array_equal(load_weights(self.path("w.txt")).w, [0.25] * 4)
        self.assertIn("wrote 4 uniform weights", out)
        self.assertTrue(os.path.exists(self.path("w.txt.log")))

    def test_uniform_needs_size(self):
        status, _, err = self.run_cli("weights", "--method", "uniform", "--out", self.path("w.txt"))
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR usage: "))

    def test_tikhonov_from_system_file(self):
        measures, points, config = discrete_example()
        save_system(build_system(measures, Trajectory(points, 1.0), config), self.path("system.txt"))
        status, _, err = self.run_cli(
            "weights", "--method", "lsw", "--system", self.path("system.txt"),
            "--alpha", "0", "--out", self.path("w.txt"),
        )
        self.assertEqual(status, 0, err)
        w = load_weights(self.path("w.txt"))
        np.testing.assert_allclose(w.w, [0.75, 0.75, -0.5], atol=1e-12)
        self.assertEqual(w.method, "lsw")

    def test_pot_on_incomplete_library(self):
        save_library(synthetic_library(["AB", "AAB"]), self.path("lib.txt"))
        status, _, err = self.run_cli(
            "weights", "--method", "pot", "--library", self.path("lib.txt"), "--out", self.path("w.txt")
        )
        self.assertEqual(status, 2)
        self.assertEqual(err.splitlines()[0], f"ERROR precondition: P=2 is {NOT_COMPLETE}")
        self.assertFalse(os.path.exists(self.path("w.txt")))

    def test_pot_prefix_of_incomplete_library(self):
        save_library(synthetic_library(["AB", "AAB"]), self.path("lib.txt"))
        status, _, err = self.run_cli(
            "weights", "--method", "pot", "--prefix", "--library", self.path("lib.txt"),
            "--out", self.path("w.txt"),
        )
        self.assertEqual(status, 0, err)
        np.testing.assert_allclose(load_weights(self.path("w.txt")).w, [1.0, 0.0], atol=1e-12)

    def test_estimate_from_uniform_weights(self):
        save_library(synthetic_library(["AB", "AAB", "ABB"]), self.path("lib.txt"))
        self.run_cli("weights", "--method", "uniform", "--P", "3", "--out", self.path("w.txt"))
        status, out, err = self.run_cli(
            "estimate", "--weights", self.path("w.txt"), "--library", self.path("lib.txt"),
            "--observables", "1,lyapunov", "--out", self.path("est.csv"),
        )
        self.assertEqual(status, 0, err)
        self.assertIn("lyapunov", out)
        with open(self.path("est.csv")) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "observable,E_hat")
        values = dict(line.split(",") for line in lines[1:])
        self.assertAlmostEqual(float(values["1"]), 1.0, places=14)
        self.assertAlmostEqual(float(values["lyapunov"]), (0.9956 + 2 * 0.9710) / 3, places=12)

    def test_unknown_command(self):
        status, _, err = self.run_cli("frobnicate")
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR usage: "))

    def test_invalid_flag_value(self):
        status, _, err = self.run_cli("weights", "--method", "lsw", "--alpha", "-1")
        self.assertEqual(status, 1)
        self.assertIn("non-negative", err)

    def test_missing_method(self):
        status, _, err = self.run_cli("weights", "--P", "3")
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR usage: "))

    def test_missing_config_file(self):
        status, _, err = self.run_cli("weights", "--method", "uniform", "--P", "2", "--config", self.path("nope.cfg"))
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR config: "))

    def test_unknown_setting_in_config(self):
        with open(self.path("bad.cfg"), "w") as f:
            f.write("colour = red\n")
        status, _, err = self.run_cli("weights", "--method", "uniform", "--P", "2", "--config", self.path("bad.cfg"))
        self.assertEqual(status, 1)
        self.assertIn("colour", err)

    def test_missing_input_file(self):
        status, _, err = self.run_cli(
            "weights", "--method", "lsw", "--system", self.path("absent.txt"), "--out", self.path("w.txt")
        )
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR io: "))

    def test_snippets_need_count_and_duration(self):
        status, _, err = self.run_cli("snippets", "--count", "3")
        self.assertEqual(status, 1)
        self.assertIn("--duration", err)

    def test_search_budget_exhausted(self):
        with open(self.path("tiny.cfg"), "w") as f:
            f.write("search_refinements = 1\nsearch_runs = 1\nsearch_duration = 20\n")
        status, _, err = self.run_cli(
            "find-orbits", "--lmax", "3", "--config", self.path("tiny.cfg"), "--jobs", "1",
            "--out", self.path("lib.txt"),
        )
        self.assertEqual(status, 2)
        lines = err.splitlines()
        self.assertTrue(lines[0].startswith("ERROR incomplete-library: "))
        self.assertTrue(lines[1].startswith("missing words: "))

    def test_paper_scale_flag(self):
        parser = create_parser()
        for flag in ("--paper-scale", "--full-scale"):
            self.assertTrue(parser.parse_args(["weights", "--method", "uniform", flag]).full_scale)
        self.assertFalse(parser.parse_args(["weights", "--method", "uniform"]).full_scale)
        status, _, err = self.run_cli(
            "weights", "--method", "uniform", "--P", "2", "--paper-scale", "--out", self.path("w.txt")
        )
        self.assertEqual(status, 0, err)

    def test_plot_saved_theta_scan(self):
        with open(self.path("scan.csv"), "w") as f:
            f.write("theta,to_ones,to_identity\n0.1,5,1\n1,3,2.5\n10,1,4\n")
        status, out, err = self.run_cli(
            "plot", "--what", "theta-scan", "--from", self.path("scan.csv"), "--out", self.path("scan.svg")
        )
        self.assertEqual(status, 0, err)
        self.assertIn("scan.svg", out)
        self.assertTrue(os.path.exists(self.path("scan.svg")))

    def test_malformed_theta_scan(self):
        with open(self.path("scan.csv"), "w") as f:
            f.write("theta,to_ones\n0.1,5\n")
        status, _, err = self.run_cli("plot", "--what", "theta-scan", "--from", self.path("scan.csv"))
        self.assertEqual(status, 2)
        self.assertTrue(err.startswith("ERROR parse: "))

    def test_plot_pot_weight_distribution(self):
        save_library(synthetic_library(["AB", "AAB", "ABB", "AAAB"]), self.path("lib.txt"))
        status, out, err = self.run_cli(
            "plot", "--what", "distribution", "--method", "pot", "--library", self.path("lib.txt"),
            "--out", self.path("pot.svg"),
        )
        self.assertEqual(status, 0, err)
        self.assertTrue(os.path.exists(self.path("pot.svg")))

    def test_plot_weight_distribution_from_system(self):
        measures, points, config = discrete_example()
        save_system(build_system(measures, Trajectory(points, 1.0), config), self.path("system.txt"))
        status, _, err = self.run_cli(
            "plot", "--what", "distribution", "--method", "lsw", "--system", self.path("system.txt"),
            "--out", self.path("lsw.svg"),
        )
        self.assertEqual(status, 0, err)
        self.assertTrue(os.path.exists(self.path("lsw.svg")))

    def test_weight_distribution_needs_method(self):
        status, _, err = self.run_cli("plot", "--what", "distribution", "--out", self.path("d.svg"))
        self.assertEqual(status, 1)
        self.assertTrue(err.startswith("ERROR usage: "))

    def test_parser_knows_every_command(self):
        parser = create_parser()
        required = {"weights": ["--method", "uniform"], "estimate": ["--weights", "w.txt"]}
        for verb in ("find-orbits", "snippets", "theta-scan", "build-system", "weights",
                     "estimate", "lyapunov", "sweep", "plot"):
            self.assertEqual(parser.parse_args([verb, *required.get(verb, [])]).verb, verb)


if __name__ == "__main__":
    unittest.main()
