from __future__ import annotations

import math
import os
import tempfile
import unittest

import numpy as np
from helpers import slow, synthetic_library

from chaosweights.dynamics import Params
from chaosweights.errors import FileFormatError, PreconditionError
from chaosweights.experiments import (
    THETA_SCAN_HEADER,
    EMAX_TAG,
    NOT_COMPLETE,
    ExperimentConfig,
    ResultRow,
    Truth,
    _pot_table,
    max_error,
    permutation_order,
    permuted_library,
    read_results,
    read_summary,
    read_theta_scan,
    read_truth,
    reference_truth,
    relative_error,
    run_sweep,
    summarize,
    weight_lambda_fit,
    weight_distribution,
    write_results,
    write_theta_scan,
    write_truth,
)
from chaosweights.kernel import CorrelationSystem, ThetaScan
from chaosweights.library import SearchBudget, build_complete_library
from chaosweights.measures import Snippet, measure_average, snippet_measures
from chaosweights.observables import BASIS_TAGS, LYAPUNOV_TAG, basis
from chaosweights.weights import solve_tikhonov


def cell(method="lsw", P=3, r=1, s=0, N=10, errors=None):
    errors = errors or [0.1] * len(BASIS_TAGS)
    return [
        ResultRow(method, "orbit", P, r, s, N, tag, 0.0, e, e)
        for tag, e in zip(BASIS_TAGS, errors)
    ]


def flat_truth():
    means = {tag: 0.5 for tag in BASIS_TAGS}
    means["1"] = 1.0
    variances = {tag: 1.0 for tag in BASIS_TAGS}
    variances["1"] = 0.0
    return Truth(means, variances, {tag: 0.01 for tag in BASIS_TAGS})


class ErrorTest(unittest.TestCase):
    def test_relative_error(self):
        self.assertAlmostEqual(relative_error(1.0, 1.2, 4.0), 0.1)
        self.assertAlmostEqual(relative_error(1.0, 0.75, 0.0), 0.25)
        with self.assertRaises(PreconditionError):
            relative_error(1.0, 1.0, -1.0)

    def test_max_error(self):
        errors = [0.1] * len(BASIS_TAGS)
        errors[4] = 0.7
        self.assertEqual(max_error(cell(errors=errors)), 0.7)
        with self.assertRaises(PreconditionError):
            max_error(cell()[:-1])

    def test_constant_observable_has_absolute_error(self):
        self.assertEqual(flat_truth().variance("1"), 1.0)
        self.assertEqual(flat_truth().variance("x"), 1.0)


class PermutationTest(unittest.TestCase):
    def test_first_ordering_is_identity(self):
        np.testing.assert_array_equal(permutation_order(6, 1, 3), np.arange(6))

    def test_seeded_shuffles(self):
        a = permutation_order(21, 2, 3)
        np.testing.assert_array_equal(a, permutation_order(21, 2, 3))
        np.testing.assert_array_equal(np.sort(a), np.arange(21))
        self.assertFalse(np.array_equal(a, permutation_order(21, 3, 3)))
        with self.assertRaises(PreconditionError):
            permutation_order(6, 0, 3)

    def test_permuted_library(self):
        lib = synthetic_library(["ABB", "AB", "AAB"])
        self.assertEqual(permuted_library(lib, 1, 0).words, ["AB", "AAB", "ABB"])
        shuffled = permuted_library(lib, 2, 0)
        self.assertEqual(shuffled.ordering, "r2")
        self.assertEqual(sorted(shuffled.words), ["AAB", "AB", "ABB"])


class SummaryTest(unittest.TestCase):
    def test_quartiles_over_seeds(self):
        rows = []
        for s, value in enumerate([1.0, 2.0, 3.0, 4.0]):
            rows.extend(cell(s=s, errors=[value] * len(BASIS_TAGS)))
        summary = {(row.observable, row.N): row for row in summarize(rows)}
        x = summary[("x", 10)]
        self.assertAlmostEqual(x.median_Erel, 2.5)
        self.assertAlmostEqual(x.q25, 1.75)
        self.assertAlmostEqual(x.q75, 3.25)
        self.assertAlmostEqual(summary[(EMAX_TAG, 10)].median_Erel, 2.5)

    def test_emax_takes_cell_maximum(self):
        errors = [0.0] * len(BASIS_TAGS)
        errors[-1] = 5.0
        rows = cell(errors=errors) + [ResultRow("lsw", "orbit", 3, 1, 0, 10, LYAPUNOV_TAG, 0.9, 0.0, 9.0)]
        summary = {row.observable: row for row in summarize(rows)}
        self.assertEqual(summary[EMAX_TAG].median_Erel, 5.0)
        self.assertEqual(summary[LYAPUNOV_TAG].median_Erel, 9.0)

    def test_incomplete_cells_have_no_emax(self):
        summary = summarize(cell()[:5])
        self.assertNotIn(EMAX_TAG, {row.observable for row in summary})


class LambdaFitTest(unittest.TestCase):
    def test_line(self):
        exponents = [0.8, 0.9, 1.0, 1.1]
        fit = weight_lambda_fit([1.0 - 0.5 * lam for lam in exponents], exponents)
        self.assertAlmostEqual(fit.intercept, 1.0)
        self.assertAlmostEqual(fit.slope, -0.5)
        self.assertTrue(fit.decreasing)
        with self.assertRaises(PreconditionError):
            weight_lambda_fit([1.0], [0.9])


class PotTableTest(unittest.TestCase):
    def test_incomplete_sizes_are_skipped(self):
        lib = synthetic_library(["AB", "AAB", "ABB", "AAAB"])
        table, skipped = _pot_table(lib, [1, 2, 3, 4])
        self.assertEqual(sorted(table), [1, 3])
        self.assertEqual(
            skipped,
            [f"skip method=pot P=2 reason={NOT_COMPLETE}", f"skip method=pot P=4 reason={NOT_COMPLETE}"],
        )
        self.assertAlmostEqual(table[3].total, 1.0, places=10)


class WeightDistributionTest(unittest.TestCase):
    def test_uniform_rows(self):
        table = weight_distribution("uniform", [1, 2, 4])
        self.assertEqual(sorted(table), [1, 2, 4])
        np.testing.assert_array_equal(table[4], [0.25] * 4)

    def test_least_squares_rows_restrict_the_system(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(4, 4))
        system = CorrelationSystem(m @ m.T / 4 + 0.1 * np.eye(4), rng.normal(size=4), 1.0, 10, 0)
        table = weight_distribution("lsw", range(1, 5), system=system, alpha=1e-8)
        for P in range(1, 5):
            np.testing.assert_allclose(table[P], solve_tikhonov(system.restricted(P), 1e-8).w)

    def test_pot_rows_use_prefix_weights(self):
        lib = synthetic_library(["AB", "AAB", "ABB", "AAAB"])
        table = weight_distribution("pot", [1, 2, 3, 4], library=lib)
        np.testing.assert_allclose(table[1], [1.0], atol=1e-12)
        np.testing.assert_allclose(table[2], [1.0, 0.0], atol=1e-12)
        self.assertEqual(table[4][3], 0.0)
        np.testing.assert_allclose(table[4][:3], table[3], atol=1e-12)

    def test_missing_inputs(self):
        with self.assertRaises(PreconditionError):
            weight_distribution("lsw", [1, 2])
        with self.assertRaises(PreconditionError):
            weight_distribution("markov", [1, 2], measures=[])
        with self.assertRaises(PreconditionError):
            weight_distribution("guess", [1])


class ConfigTest(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(PreconditionError):
            ExperimentConfig(methods=("lsw", "guess"))
        with self.assertRaises(PreconditionError):
            ExperimentConfig(sample_counts=(1000, 100))
        with self.assertRaises(PreconditionError):
            ExperimentConfig(kinds=("snippet",))
        with self.assertRaises(PreconditionError):
            ExperimentConfig(seeds=0)


class FileTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_results_table(self):
        rows = cell(errors=[0.1 * k for k in range(len(BASIS_TAGS))])
        write_results(rows, self.path("results.csv"))
        self.assertEqual(read_results(self.path("results.csv")), rows)
        with open(self.path("results.csv")) as f:
            self.assertEqual(f.readline().strip(), "method,kind,P,r,s,N,observable,E_true,E_hat,E_rel")

    def test_bad_results_header(self):
        with open(self.path("results.csv"), "w") as f:
            f.write("method,P\nlsw,3\n")
        with self.assertRaises(FileFormatError):
            read_results(self.path("results.csv"))

    def test_bad_number(self):
        write_results(cell(), self.path("results.csv"))
        with open(self.path("results.csv"), "a") as f:
            f.write("lsw,orbit,three,1,0,10,x,0,0,0\n")
        with self.assertRaises(FileFormatError) as cm:
            read_results(self.path("results.csv"))
        self.assertEqual(cm.exception.lineno, len(BASIS_TAGS) + 2)

    def test_truth_file(self):
        truth = flat_truth()
        write_truth(truth, self.path("truth.csv"))
        loaded = read_truth(self.path("truth.csv"))
        self.assertEqual(loaded.means, truth.means)
        self.assertEqual(loaded.variances, truth.variances)

    def test_truth_file_lacking_observable(self):
        truth = flat_truth()
        del truth.means["z2"]
        write_truth(truth, self.path("truth.csv"))
        with self.assertRaises(FileFormatError):
            read_truth(self.path("truth.csv"))


    def test_theta_scan_file(self):
        scan = ThetaScan(np.array([0.1, 1.0, 10.0]), np.array([5.0, 3.0, 1.0]), np.array([1.0, 2.5, 4.0]), 1.0)
        write_theta_scan(scan, self.path("scan.csv"))
        with open(self.path("scan.csv")) as f:
            self.assertEqual(f.readline().strip(), ",".join(THETA_SCAN_HEADER))
        loaded = read_theta_scan(self.path("scan.csv"))
        np.testing.assert_array_equal(loaded.thetas, scan.thetas)
        np.testing.assert_array_equal(loaded.to_identity, scan.to_identity)
        self.assertEqual(loaded.best, 1.0)

    def test_theta_scan_rows_out_of_order(self):
        with open(self.path("scan.csv"), "w") as f:
            f.write("theta,to_ones,to_identity\n10,1,4\n0.1,5,1\n1,2,2\n")
        loaded = read_theta_scan(self.path("scan.csv"))
        np.testing.assert_array_equal(loaded.thetas, [0.1, 1.0, 10.0])
        self.assertEqual(loaded.best, 1.0)

    def test_empty_theta_scan(self):
        with open(self.path("scan.csv"), "w") as f:
            f.write("theta,to_ones,to_identity\n")
        with self.assertRaises(FileFormatError):
            read_theta_scan(self.path("scan.csv"))
        with self.assertRaises(OSError):
            read_theta_scan(self.path("absent.csv"))


class ReferenceTruthTest(unittest.TestCase):
    def test_short_runs(self):
        truth = reference_truth(Params(), 2, 20, lyapunov_time=50.0)
        self.assertEqual(truth.means["1"], 1.0)
        self.assertEqual(truth.variances["1"], 0.0)
        self.assertTrue(5.0 < truth.means["z"] < 45.0)
        self.assertGreater(truth.variances["z"], 0.0)
        self.assertIn(LYAPUNOV_TAG, truth.means)
        for tag in BASIS_TAGS:
            self.assertGreaterEqual(truth.variances[tag], 0.0)


class SnippetSweepTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        rng = np.random.default_rng(11)
        self.snippets = [
            Snippet(f"S{k + 1}", rng.normal(scale=8.0, size=(5, 3)) + [0.0, 0.0, 25.0], 0.01)
            for k in range(3)
        ]
        self.cfg = ExperimentConfig(
            methods=("lsw", "nnls", "markov", "uniform"),
            kinds=("snippet",),
            sizes=(1, 3),
            permutations=2,
            seeds=2,
            sample_counts=(5, 10),
            snippet_path="snippets.txt",
            output_path=os.path.join(self.tmp.name, "results.csv"),
        )
        self.library = synthetic_library(["AB", "AAB", "ABB"])

    def tearDown(self):
        self.tmp.cleanup()

    def run_sweep(self, **kwargs):
        return run_sweep(self.cfg, self.library, self.snippets, truth=flat_truth(), **kwargs)

    def test_rows_and_files(self):
        finished = []
        result = self.run_sweep(on_seed_done=finished.append)
        self.assertEqual(finished, [0, 1])
        self.assertEqual(result.skipped, [])
        self.assertEqual(read_results(self.cfg.output_path), result.rows)
        self.assertEqual(
            read_summary(os.path.join(self.tmp.name, "results.summary.csv")), result.summary
        )
        self.assertEqual({row.kind for row in result.rows}, {"snippet"})
        self.assertEqual({row.method for row in result.rows}, set(self.cfg.methods))
        self.assertEqual({row.s for row in result.rows}, {0, 1})
        self.assertNotIn(LYAPUNOV_TAG, {row.observable for row in result.rows})
        for row in result.rows:
            self.assertAlmostEqual(
                row.E_rel, relative_error(row.E_true, row.E_hat, flat_truth().variance(row.observable))
            )

    def test_single_measure_gets_full_weight(self):
        result = self.run_sweep()
        measures = snippet_measures(self.snippets)
        z = [a for a in basis() if a.tag == "z"][0]
        for row in result.rows:
            if row.P == 1 and row.method in ("nnls", "markov", "uniform") and row.observable == "z":
                self.assertAlmostEqual(row.E_hat, measure_average(measures[0], z), places=12)

    def test_constant_observable_is_exact_on_simplex(self):
        result = self.run_sweep()
        for row in result.rows:
            if row.observable == "1" and row.method in ("nnls", "markov", "uniform"):
                self.assertAlmostEqual(row.E_hat, 1.0, places=12)

    def test_rerun_reproduces_results(self):
        self.run_sweep()
        with open(self.cfg.output_path, "rb") as f:
            first = f.read()
        finished = []
        self.run_sweep(on_seed_done=finished.append)
        self.assertEqual(finished, [])
        with open(self.cfg.output_path, "rb") as f:
            self.assertEqual(f.read(), first)

    def test_sizes_beyond_library(self):
        self.cfg.sizes = (4,)
        with self.assertRaises(PreconditionError):
            self.run_sweep()


class OrbitSweepTest(unittest.TestCase):
    @slow
    def test_short_library(self):
        p = Params()
        library = build_complete_library(4, p, SearchBudget(max_runs=4, run_duration=500.0))
        with tempfile.TemporaryDirectory() as tmp:
            cfg = ExperimentConfig(
                methods=("lsw", "uniform", "pot"),
                permutations=2,
                seeds=4,
                sample_counts=(1_000, 10_000),
                output_path=os.path.join(tmp, "results.csv"),
                lyapunov_time=1e4,
            )
            result = run_sweep(cfg, library)
        self.assertEqual(result.skipped, [])
        pot_rows = [row for row in result.rows if row.method == "pot"]
        self.assertTrue(pot_rows)
        self.assertEqual({row.r for row in pot_rows}, {1})
        for row in pot_rows:
            if row.observable == LYAPUNOV_TAG:
                self.assertLess(row.E_rel, 0.15)
        self.assertTrue(all(math.isfinite(row.E_rel) for row in result.rows))


if __name__ == "__main__":
    unittest.main()
