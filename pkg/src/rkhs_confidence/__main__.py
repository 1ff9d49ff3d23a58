import sys
import logging
import typing

import numpy as np

from rkhs_confidence.config import from_console
from rkhs_confidence.director import Director
from rkhs_confidence.utils import CouldNotLoadFileError, ExpectedValueError

EXIT_ACCESS = 1
EXIT_CONTRACT = 2
EXIT_NUMERIC = 3


def _log_chain(err: BaseException):
    """Log ``err`` and every exception it was raised from, outermost first."""
    logger = logging.getLogger(__name__)
    while err is not None:
        logger.critical(f"{err.__class__.__name__}: {err}")
        err = err.__cause__


def main(args: typing.Optional[typing.List[str]] = None) -> int:
    """Run the command given on the console and translate failures into exit statuses."""
    try:
        # [1:] skips the program name, such as ["foo.py", ...]
        cfg = from_console(sys.argv[1:] if args is None else args)
        return Director(cfg).run()
    except CouldNotLoadFileError as err:
        _log_chain(err)
        return EXIT_ACCESS
    # LinAlgError is a ValueError, so numerical failures go first
    except (ArithmeticError, MemoryError, np.linalg.LinAlgError) as err:
        _log_chain(err)
        return EXIT_NUMERIC
    except (ExpectedValueError, ValueError) as err:
        _log_chain(err)
        return EXIT_CONTRACT


if __name__ == '__main__':
    sys.exit(main())
