import io
import os
import shutil
from unittest import TestCase

import numpy as np

from rkhs_confidence import report
from rkhs_confidence.utils import ContractViolationError

OUT = "tests/files/out/report"


class TestFormatting(TestCase):
    def test_values(self):
        self.assertEqual("true", report.format_value(True))
        self.assertEqual("false", report.format_value(np.bool_(False)))
        self.assertEqual("7", report.format_value(np.int64(7)))
        self.assertEqual("0.1", report.format_value(0.1))
        self.assertEqual("1.0, 2.5", report.format_value([1.0, 2.5]))
        self.assertEqual("1.0, 0.0; 0.0, 1.0", report.format_value(np.eye(2)))
        self.assertEqual("", report.format_value(None))
        self.assertEqual("pointwise(m=1)", report.format_value("pointwise(m=1)"))

    def test_reals_parse_back_exactly(self):
        for x in (0.1, 1.0 / 3.0, 2.0 ** -60, 123456789.123, -0.0):
            self.assertEqual(x, float(report.format_real(x)))
        matrix = np.array([[1.0 / 3.0, 2.0], [2.0, 1e-17]])
        self.assertTrue(np.array_equal(matrix, report.parse_reals(report.format_value(matrix))))
        self.assertListEqual([0.5, -1.25], report.parse_reals("0.5, -1.25").tolist())


class TestSummary(TestCase):
    def test_write(self):
        with io.StringIO() as stream:
            report.write_summary(stream, [("alpha", 0.05), ("m", 2)], ["ci run"])
            self.assertEqual("# ci run\nalpha = 0.05\nm = 2\n", stream.getvalue())

    def test_parse(self):
        entries = report.parse_summary("# comment\n\nalpha = 0.05\ncenter = 1.0, 2.0\nempty =\n")
        self.assertDictEqual({"alpha": "0.05", "center": "1.0, 2.0", "empty": ""}, entries)

    def test_parse_rejects(self):
        self.assertRaises(ContractViolationError, report.parse_summary, "no separator here")
        self.assertRaises(ContractViolationError, report.parse_summary, "= value")
        self.assertRaises(ContractViolationError, report.parse_summary, "a = 1\na = 2")


class TestFiles(TestCase):
    def test_summary_file(self):
        path = os.path.join(OUT, "nested", "summary.txt")
        report.save_summary(path, [("sigma_hat", np.array([[2.0, 0.5], [0.5, 1.0]])), ("stable", False)])
        entries = report.load_summary(path)
        self.assertEqual("false", entries["stable"])
        self.assertListEqual([[2.0, 0.5], [0.5, 1.0]], report.parse_reals(entries["sigma_hat"]).tolist())

    def test_rows(self):
        path = os.path.join(OUT, "rows.csv")
        report.write_rows(path, ["index", "covered", "length"], [(0, True, 0.25), (1, np.bool_(False), 1.0 / 3.0)])
        with open(path, encoding="UTF-8") as file:
            self.assertEqual("index,covered,length\n0,1,0.25\n1,0,0.3333333333333333\n", file.read())

    def tearDown(self) -> None:
        shutil.rmtree(OUT, ignore_errors=True)
