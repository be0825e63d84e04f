"""Exception types raised by the scheduling library."""


class EhSchedError(Exception):
    """Base class for all library errors."""


class InvalidScenario(EhSchedError, ValueError):
    """A harvest scenario has negative, non-finite or otherwise unusable values."""


class ParseError(InvalidScenario):
    """A scenario file could not be read."""


class InvalidDeadline(EhSchedError, ValueError):
    pass


class UnreachableBitTarget(EhSchedError, ValueError):
    """The requested number of bits cannot be sent with the harvested energy.

    ``bound`` is the supremum of achievable bits over all completion times.
    """

    def __init__(self, bits: float, bound: float):
        super().__init__(
            f"bit target {bits:g} is unreachable; the supremum over all "
            f"completion times is {bound:.6g} bits"
        )
        self.bits = bits
        self.bound = bound


class AlgorithmInvariantViolated(EhSchedError, RuntimeError):
    """An internal consistency check of a solver failed (a bug, not bad input)."""


class OracleTooExpensive(EhSchedError, ValueError):
    pass
