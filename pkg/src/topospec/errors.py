"""Exception types shared across the package."""


class TopospecError(Exception):
    pass


class ValidationError(TopospecError, ValueError):
    pass


class ZeroRowError(ValidationError):
    """A row of the adjacency sums to zero (agent with no outgoing channel)."""


class ParseError(TopospecError, ValueError):
    pass


class DomainError(TopospecError, ValueError):
    pass


class SingularSystemError(TopospecError, ArithmeticError):
    pass


class EmptyNeighborhoodError(ValidationError):
    pass


class DegenerateInputError(TopospecError, ValueError):
    pass


class TieError(TopospecError, ValueError):
    pass


class DegenerateInputWarning(UserWarning):
    pass
