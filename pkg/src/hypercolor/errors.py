"""Exception types shared by the package and mapped to CLI exit codes."""


class ParameterError(ValueError):
    """Invalid or infeasible parameters (CLI exit code 2)."""


class ParseError(ParameterError):
    """Malformed hypergraph or coloring file."""


class DomainError(ParameterError):
    """Argument outside a formula's domain of validity."""


class CapacityError(RuntimeError):
    """Request exceeds a configured resource cap (CLI exit code 3)."""
