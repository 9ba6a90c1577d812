"""Exception and warning types shared across the package."""


class PnmlError(Exception):
    """Base class for all errors raised by pnml_ood."""


class InvalidInput(PnmlError, ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class FormatError(InvalidInput):
    """A file could not be parsed.

    ``offset`` is a byte offset for binary files, ``line`` a 1-based line
    number for text files; whichever applies is included in the message.
    """

    def __init__(self, message, path=None, offset=None, line=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)
        self.path = path
        self.offset = offset
        self.line = line


class NumericalFailure(PnmlError, ArithmeticError):
    """The eigensolver (or another numerical kernel) did not converge."""


class DegenerateTraining(UserWarning):
    """Training data has numerical rank 0.

    Emitted as a warning rather than raised: statistics are still built (with
    zero kernels) and the caller decides whether that is acceptable.
    """
