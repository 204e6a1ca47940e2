"""Exception hierarchy for the certification pipeline.

Input problems subclass ``ValueError`` so callers that only know about the
builtin keep working; verdicts (a failed certification) do not.
"""


class BellRandError(Exception):
    """Base class for every error raised by this package."""


class MalformedRowError(BellRandError, ValueError):
    """A trial record could not be parsed into five integers."""


class DomainError(BellRandError, ValueError):
    """A value lies outside the domain an operation accepts."""


class EmptyLogError(BellRandError, ValueError):
    """A trial log contains no records."""


class MissingInputError(BellRandError, ValueError):
    """Some input pair (x, y) was never observed."""


class ZeroProbabilityInputError(BellRandError, ValueError):
    """Trials were observed for an input pair the distribution gives probability 0."""


class AboveTsirelsonError(DomainError):
    """A CHSH value above the quantum maximum 2*sqrt(2) was supplied."""


class InfeasibleError(BellRandError, ValueError):
    """The no-signalling program has no feasible point."""


class NonUniformSettingsError(BellRandError, ValueError):
    """The local-model bound was requested for non-uniform settings."""


class LengthMismatchError(BellRandError, ValueError):
    """Bit strings do not have the lengths the extractor parameters require."""


class SeedExhaustedError(BellRandError):
    """The private seed ran out before the protocol step completed."""


class CertificationFailedError(BellRandError):
    """The observed violation does not certify any min-entropy."""


class TooShortError(BellRandError, ValueError):
    """A bit string is shorter than a statistical test requires."""

    def __init__(self, test_name: str, length: int, minimum: int):
        self.test_name = test_name
        self.length = length
        self.minimum = minimum
        super().__init__(
            f"{test_name} needs at least {minimum} bits, got {length}"
        )
