"""Exception types shared across the package."""


class AdvdualError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteCoordinate(AdvdualError):
    pass


class NegativeEpsilon(AdvdualError):
    pass


class NonUniformGrid(AdvdualError):
    """The 1-D fast path requires a uniformly spaced grid."""


class ZeroOneHasNoPhi(AdvdualError):
    """The zero-one loss exposes only its optimal conditional risk and
    threshold classification; it has no margin function."""


class EtaOutOfRange(AdvdualError):
    pass


class EtaAtBoundary(AdvdualError):
    """The derivative of the optimal conditional risk diverges at 0 and 1."""


class NegativeH(AdvdualError):
    pass


class MassMismatch(AdvdualError):
    """Transport requires equal total masses."""


class NegativeMass(AdvdualError):
    pass


class InstanceTooLarge(AdvdualError):
    """Brute-force oracles only accept desk-scale instances."""


class InfeasiblePair(AdvdualError):
    """A pair of score fields violates the feasibility constraint."""


class InfeasibleDual(AdvdualError):
    """A dual solution violates its marginal or support constraints."""


class ParseError(AdvdualError):
    pass


class ValidationError(AdvdualError):
    pass


class WriteError(AdvdualError):
    pass
