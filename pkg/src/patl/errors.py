"""Exception hierarchy. CLI exit codes are attached to each class."""


class PatlError(Exception):
    exit_code = 3


class StructuralError(PatlError, ValueError):
    """Inputs live on incompatible grids or have inconsistent shapes."""

    exit_code = 2


class ConfigError(PatlError, ValueError):
    exit_code = 2


class NumericalError(PatlError, ArithmeticError):
    exit_code = 3


class CFLViolation(ConfigError):
    def __init__(self, dt, dt_max):
        super().__init__(f"time step {dt:g} violates CFL; need dt <= {dt_max:g}")
        self.dt = dt
        self.dt_max = dt_max


class DataInconsistencyError(NumericalError):
    pass


class SingularIntegrandError(NumericalError):
    def __init__(self, node, value):
        super().__init__(f"h' = {value:g} below guard at node {node}")
        self.node = node
        self.value = value


class HypothesisViolation(ConfigError):
    """A required hypothesis (e.g. T > 2 theta H) does not hold."""


class CertificateViolation(PatlError):
    exit_code = 4
