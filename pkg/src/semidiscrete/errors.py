"""Exception hierarchy shared by all modules."""


class SemiDiscreteError(Exception):
    """Base class; the CLI reports ``type(err).__name__`` in its error JSON."""


class ParseError(SemiDiscreteError):
    pass


class ValidationError(SemiDiscreteError):
    pass


class DimensionError(ValidationError):
    pass


class CapacityError(SemiDiscreteError):
    pass


class NonFiniteError(SemiDiscreteError):
    pass


class ImbalanceError(SemiDiscreteError):
    pass


class InfeasibleError(SemiDiscreteError):
    pass
