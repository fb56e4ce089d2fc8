"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside its physically meaningful range."""


class NumericalDomainError(ArithmeticError):
    """A numerical routine received input it cannot handle (e.g. not positive-definite)."""
