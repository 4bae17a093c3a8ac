"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for input/validation problems, 3 for numerical failures and 4 for an
infeasible gain design.
"""


class CCVoltVarError(Exception):
    exit_code = 1


class InputError(CCVoltVarError):
    exit_code = 2


class ParseError(InputError):
    pass


class SchemaError(ParseError):
    pass


class TopologyError(InputError):
    pass


class UnitError(InputError):
    pass


class AlignmentError(InputError):
    pass


class DomainError(InputError, ValueError):
    pass


class NotPositiveDefinite(InputError):
    pass


class NumericalError(CCVoltVarError):
    exit_code = 3


class SingularityError(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, max_iter, residual=float("nan")):
        super().__init__(
            f"power flow did not converge in {max_iter} iterations "
            f"(residual {residual:.3e})"
        )
        self.max_iter = max_iter
        self.residual = residual


class PowerFlowFailure(NoConvergence):
    pass


class TooManyDropped(NumericalError):
    pass


class MaxNewtonIterations(NumericalError):
    pass


class DesignError(CCVoltVarError):
    exit_code = 4


class NoFeasibleStart(DesignError):
    def __init__(self, msg=None):
        super().__init__(
            msg
            or "no feasible initial gains found; modify the prescribed "
            "probability epsilon to allow for more voltage violations"
        )


class SubproblemInfeasible(DesignError):
    pass


class MaxOuterIterations(DesignError):
    pass
