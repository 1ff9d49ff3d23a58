import logging
from unittest import TestCase

import tests.suppress as suppress
from rkhs_confidence import errors, solver


class TestErrorMsgBase(TestCase):
    @suppress.out
    def test_print(self):
        # All arguments correctly passed
        self.assertIsInstance(
            errors.ErrorMsgBase.print(errors.ErrorMsgBase.WRONG_VALUE, "x", "y"),
            str,
            msg="The function should return a string.")
        # Missing argument
        self.assertEqual(
            errors.ErrorMsgBase.print(errors.ErrorMsgBase.WRONG_VALUE, "y"),
            None,
            msg="The function should complain it has not received enough arguments to complete the error message")

    def test_missing_argument_is_logged(self):
        with self.assertLogs(logging.getLogger("rkhs_confidence.errors"), logging.WARNING):
            errors.ErrorMsgBase.print(errors.ErrorMsgBase.DIMENSION_MISMATCH, "2")

    def test_module_templates_inherit_base(self):
        # module-level templates extend the shared ones
        self.assertEqual(errors.ErrorMsgBase.NOT_FINITE, solver.ErrorMsg.NOT_FINITE)
        self.assertEqual("Newton iteration 1: objective 2, gradient norm 3, step length 4.",
                         solver.ErrorMsg.print(solver.ErrorMsg.NEWTON_STEP, "1", "2", "3", "4"))


class TestConsole(TestCase):
    def test_set_console_level(self):
        previous = errors.set_console_level("debug")
        try:
            self.assertEqual(logging.DEBUG, errors.console_log_handler.level)
            self.assertEqual(logging.DEBUG, logging.getLogger().level)
            self.assertRaises(ValueError, errors.set_console_level, "chatty")
        finally:
            errors.set_console_level(previous)
        self.assertEqual(previous, errors.console_log_handler.level)

    def test_worker_records_are_prefixed(self):
        formatter = errors.WorkerFormatter("%(message)s")
        record = logging.LogRecord("CoverageExperiment", logging.INFO, __file__, 1, "replication 3 done", None, None)
        self.assertEqual("replication 3 done", formatter.format(record))
        record.processName = "ForkProcess-2"
        self.assertEqual("[ForkProcess-2] replication 3 done", formatter.format(record))
