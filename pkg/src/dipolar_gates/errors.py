"""Exception types raised by the pipeline."""


class DipolarError(Exception):
    """Base class; ``str(err)`` is a single line suitable for machine parsing."""


class SingularPairError(DipolarError, ValueError):
    pass


class ConvergenceError(DipolarError, RuntimeError):
    pass


class CollapseError(DipolarError, RuntimeError):
    pass


class UnstableEquilibriumError(DipolarError, RuntimeError):
    pass


class ImaginaryFrequencyError(DipolarError, ValueError):
    pass


class ResonanceError(DipolarError, ValueError):
    pass


class InfeasibleError(DipolarError, ValueError):
    pass
