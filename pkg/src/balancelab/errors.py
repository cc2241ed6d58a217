"""Exception types shared across the package."""


class BalancelabError(Exception):
    pass


class DivergenceError(BalancelabError):
    """A trajectory blew past the divergence guard.

    Carries the simulation time at which the state first became
    non-finite or exceeded the guard magnitude.
    """

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"state diverged at t={time:.6g} s")


class CalibrationError(BalancelabError):
    pass


class TrialFormatError(BalancelabError):
    """Raised when a trial file cannot be parsed.

    ``line`` is the 1-based line number of the offending record.
    """

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")
