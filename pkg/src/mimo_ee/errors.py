"""Exception types raised by the library."""


class InfeasibleInputError(ValueError):
    """The QoS power requirements exceed the power budget."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before meeting tolerance."""


class UnattainableTargetError(ArithmeticError):
    """The stationarity denominator went nonpositive for the given prices."""


class NoFeasiblePointError(ValueError):
    """A brute-force search found no grid point satisfying the constraints."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration.

    ``line`` and ``field`` locate the problem in the source document when known.
    """

    def __init__(self, message, *, source=None, line=None, field=None):
        self.source = source
        self.line = line
        self.field = field
        where = [source] if source else []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
