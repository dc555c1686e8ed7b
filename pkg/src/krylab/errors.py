"""Exception hierarchy shared by every krylab module."""


class KrylabError(Exception):
    """Base class for all krylab errors."""


class InvalidInput(KrylabError, ValueError):
    pass


class SingularOperator(KrylabError):
    pass


class NoSolution(KrylabError):
    pass


class NotFriedrichs(KrylabError):
    """Positivity or coercivity condition of a Friedrichs operator fails."""

    def __init__(self, message, grid_point=None):
        super().__init__(message)
        self.grid_point = grid_point


class TruncationSingular(KrylabError):
    """The compressed n x n problem is singular; a reportable event."""

    def __init__(self, message, n=None):
        super().__init__(message)
        self.n = n


class NotPositive(KrylabError):
    pass


class PreconditionFailed(KrylabError):
    pass
