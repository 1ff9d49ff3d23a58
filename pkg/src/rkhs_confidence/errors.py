"""
Console logging for the whole package and the message templates every module builds its own ``ErrorMsg`` on.

Importing the module installs one handler on the root logger. Coverage studies fan out into worker processes, so
records logged outside the main process carry the name of the worker that produced them.
"""
import logging
import sys
from typing import Optional, Union

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
MAIN_PROCESS = "MainProcess"


class ColorHandler(logging.StreamHandler):
    # https://en.wikipedia.org/wiki/ANSI_escape_code#Colors
    GRAY8 = "38;5;8"
    GRAY7 = "38;5;7"
    ORANGE = "33"
    RED = "31"
    WHITE = "0"

    LEVEL_COLORS = {
        logging.DEBUG: GRAY8,
        logging.INFO: GRAY7,
        logging.WARNING: ORANGE,
        logging.ERROR: RED,
        logging.CRITICAL: f"1;{RED}",
    }

    def emit(self, record):
        try:
            message = self.format(record)
            # escape codes only make sense on a terminal, redirected simulation logs stay plain
            if getattr(self.stream, "isatty", lambda: False)():
                csi = f"{chr(27)}["
                message = f"{csi}{self.LEVEL_COLORS.get(record.levelno, self.WHITE)}m{message}{csi}m"
            self.stream.write(message + self.terminator)
            self.flush()
        except Exception:
            self.handleError(record)


class WorkerFormatter(logging.Formatter):
    """Prefixes the process name to records that do not come from the main process."""

    def format(self, record):
        text = super().format(record)
        if record.processName == MAIN_PROCESS:
            return text
        return f"[{record.processName}] {text}"


console_log_handler = ColorHandler(sys.stdout)
# setLevel on both handler AND logger: https://stackoverflow.com/a/17668861/8527654
console_log_handler.setLevel(logging.INFO)
console_log_handler.setFormatter(WorkerFormatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))

logging.getLogger().addHandler(console_log_handler)
logging.getLogger().setLevel(logging.INFO)


def set_console_level(level: Union[str, int]) -> int:
    """
    Change how much reaches the console, e.g. ``DEBUG`` to follow every Newton step.
    :returns: the level that was in effect before
    """
    if isinstance(level, str):
        if level.upper() not in LEVELS:
            raise ValueError(f"Logging level {level} is not one of: {', '.join(LEVELS)}.")
        level = getattr(logging, level.upper())
    previous = console_log_handler.level
    console_log_handler.setLevel(level)
    logging.getLogger().setLevel(level)
    return previous


class ErrorMsgBase:
    """
    Message templates shared by the loggers of every module.
    Modules subclass it with their own templates, see e.g. ``solver.ErrorMsg``.
    It also provides a shorthand method for inserting variables into error messages - print().
    """
    WRONG_VALUE = "Received {}, expected {}."
    DIMENSION_MISMATCH = "Point of dimension {} passed where dimension {} is required."
    NOT_FINITE = "{} contains non-finite entries."

    @staticmethod
    def print(message: str, *args: str) -> Optional[str]:
        """
        Insert the args into an error message. If the error message expects n variables, provide n arguments.
        Returns a string with the already filled out message.
        """
        expected_args = message.count("{}")

        if len(args) != expected_args:
            logging.getLogger(__name__).warning(
                f"Expected {expected_args} arguments for \"{message}\", but got {len(args)} instead."
            )
            return None
        return message.format(*args)
