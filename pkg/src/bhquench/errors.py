class ConfigError(ValueError):
    """Invalid experiment configuration; ``location`` is the dotted key path."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or violated a checked tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual
