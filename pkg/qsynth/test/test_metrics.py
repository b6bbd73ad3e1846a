"""
Tests for metric summaries and CSV output.
"""

import io
import os
import tempfile
import threading
import unittest

import numpy as np

from qsynth.metrics import (
    EVAL_COLUMNS,
    eval_row,
    parallel_map,
    smallest_interval,
    summarize,
    write_csv,
    write_rows,
)


class TestSummaries(unittest.TestCase):
    def test_smallest_interval(self):
        test_cases = [
            ([0.5], 0.95, (0.5, 0.5)),
            ([0.1, 0.9, 0.85, 0.88], 0.75, (0.85, 0.9)),
            ([0.2, 0.4, 0.6], 1.0, (0.2, 0.6)),
            # Ties go to the lowest interval.
            ([0.0, 0.25, 0.5], 0.5, (0.0, 0.25)),
            ([0.0, 0.5, 0.6, 0.7, 1.0], 0.6, (0.5, 0.7)),
        ]
        for values, coverage, expected in test_cases:
            with self.subTest(values=values, coverage=coverage):
                low, high = smallest_interval(values, coverage)
                self.assertAlmostEqual(low, expected[0], delta=1e-12)
                self.assertAlmostEqual(high, expected[1], delta=1e-12)

    def test_smallest_interval_errors(self):
        with self.assertRaises(ValueError):
            smallest_interval([])
        for coverage in [0.0, 1.5]:
            with self.subTest(coverage=coverage):
                with self.assertRaises(ValueError):
                    smallest_interval([0.5], coverage)

    def test_summarize(self):
        metrics = summarize([1.0, 0.5, 0.75, 1.0], [2, 3, 2, 0])
        self.assertEqual(metrics.mean_fidelity, 0.8125)
        self.assertEqual(metrics.mean_cnots, 1.75)
        self.assertEqual(metrics.histogram, {0: 0.25, 2: 0.5, 3: 0.25})
        self.assertEqual(list(metrics.histogram), [0, 2, 3])
        self.assertEqual(metrics.interval, (0.5, 1.0))
        with self.assertRaises(ValueError):
            summarize([1.0], [1, 2])

    def test_eval_row(self):
        metrics = summarize([0.9, 1.0], [1, 1])
        row = eval_row("agent", metrics, budget=3)
        self.assertEqual(len(row), len(EVAL_COLUMNS))
        self.assertEqual(row[:4], ("agent", 3, None, 2))
        self.assertEqual(row[-1], 1.0)


class TestCsv(unittest.TestCase):
    def test_cells(self):
        f = io.StringIO()
        write_rows(f, [(0, 0.1, None, True, np.float64(0.25), "x")], ("a", "b"))
        self.assertEqual(f.getvalue(), "a,b\n0,0.1,,1,0.25,x\n")

    def test_append_writes_one_header(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "metrics.csv")
            write_csv(path, ("a", "b"), [(1, 2)], append=True)
            write_csv(path, ("a", "b"), [(3, 4)], append=True)
            with open(path, encoding="utf-8") as f:
                self.assertEqual(f.read(), "a,b\n1,2\n3,4\n")
            write_csv(path, ("a", "b"), [])
            with open(path, encoding="utf-8") as f:
                self.assertEqual(f.read(), "a,b\n")


class TestParallelMap(unittest.TestCase):
    def test_keeps_order(self):
        items = list(range(20))
        for threads in [1, 4]:
            with self.subTest(threads=threads):
                self.assertEqual(
                    parallel_map(lambda x: x * x, items, threads),
                    [x * x for x in items],
                )

    def test_serial_runs_inline(self):
        seen = set()

        def record(x):
            seen.add(threading.get_ident())
            return x

        self.assertEqual(parallel_map(record, [1, 2, 3]), [1, 2, 3])
        self.assertEqual(seen, {threading.get_ident()})
