"""Exception types shared across the package."""


class FairclearError(Exception):
    pass


class InstanceError(FairclearError, ValueError):
    """Base class for invalid compatibility graphs."""


class DanglingEdge(InstanceError):
    pass


class EdgeIntoNdd(InstanceError):
    pass


class NegativeWeight(InstanceError):
    pass


class InvalidVertex(InstanceError):
    pass


class DuplicateEdge(InstanceError):
    pass


class SelfLoop(InstanceError):
    pass


class MalformedInstance(InstanceError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NegativeGamma(FairclearError, ValueError):
    pass


class ChainExplosion(FairclearError, RuntimeError):
    pass


class OracleTooLarge(FairclearError, RuntimeError):
    pass


class FairExceedsEfficient(FairclearError, ArithmeticError):
    """A fair matching scored above the efficient one: the efficient solve was not optimal."""


class DegenerateBound(FairclearError, ArithmeticError):
    pass


class AssumptionViolation(FairclearError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("model assumptions violated: " + ", ".join(self.violations))


class CapTooSmall(FairclearError, ValueError):
    pass


class GammaTooSmall(FairclearError, ValueError):
    pass


class ConfigError(FairclearError, ValueError):
    pass
