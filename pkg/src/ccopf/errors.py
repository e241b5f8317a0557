"""Exception hierarchy shared by all modules."""


class CCOPFError(Exception):
    """Base class for every error raised by the package."""


# network ingestion
class MissingTable(CCOPFError):
    pass


class MalformedRow(CCOPFError):
    def __init__(self, line_no, message=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if message else f"line {line_no}")


class NoRefBus(CCOPFError):
    pass


class MultipleRefBuses(CCOPFError):
    pass


class UnsupportedCostModel(CCOPFError):
    pass


class SchemaViolation(CCOPFError):
    def __init__(self, path, message=""):
        self.path = path
        super().__init__(f"{path}: {message}" if message else str(path))


class InconsistentDimension(CCOPFError):
    pass


class SingularBranch(CCOPFError):
    pass


class InvalidNetwork(CCOPFError):
    pass


# power flow
class DimensionMismatch(CCOPFError):
    pass


class NonConvergence(CCOPFError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Newton power flow did not converge after {iterations} "
                         f"iterations (residual {residual:.3e})")


class VoltageCollapse(CCOPFError):
    pass


class SingularJA(CCOPFError):
    pass


# stochastic model
class OutOfRange(CCOPFError):
    pass


class InfeasibleBounds(CCOPFError):
    pass


class InfeasibleReserve(CCOPFError):
    pass


# pricing / validation
class MissingConstraint(CCOPFError):
    pass


class NotOptimal(CCOPFError):
    pass


class NegativeZeta(CCOPFError):
    pass


class DegenerateSigma(CCOPFError):
    pass


class MissingSolution(CCOPFError):
    pass
