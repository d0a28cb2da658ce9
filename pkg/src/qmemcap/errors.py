"""Exception hierarchy shared by all modules."""


class QMemError(Exception):
    """Base class for every error raised by qmemcap."""


class DimensionError(QMemError, ValueError):
    """Operand shapes are incompatible."""


class NotHermitianError(QMemError, ValueError):
    pass


class InvalidStateError(QMemError, ValueError):
    """A matrix violates the density-operator invariants."""


class IncompleteProjectorsError(QMemError, ValueError):
    pass


class NotStochasticError(QMemError, ValueError):
    pass


class ReducibleChainError(QMemError, ValueError):
    """The chain has no unique invariant distribution."""


class NonErgodicChainError(QMemError, ValueError):
    pass


class CapExceededError(QMemError):
    """A configured size cap would be exceeded."""


class InvalidChannelError(QMemError, ValueError):
    """A channel definition violates one or more invariants.

    ``problems`` lists every violated invariant, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InvalidEnsembleError(QMemError, ValueError):
    pass


class InvalidCodeError(QMemError, ValueError):
    pass


class ConfigError(QMemError, ValueError):
    pass
