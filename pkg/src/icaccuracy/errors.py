"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ICAccuracyError`, so callers can catch one base class.
"""


class ICAccuracyError(Exception):
    pass


class RecordError(ICAccuracyError, ValueError):
    """A subject record violates one of its invariants.

    ``field`` names the offending attribute.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MismatchedEndpoint(RecordError):
    pass


class NonMonotoneTimes(RecordError):
    pass


class NegativeTime(RecordError):
    pass


class InvalidWindow(ICAccuracyError, ValueError):
    pass


class EmptyRiskSet(ICAccuracyError):
    pass


class OutOfSupport(ICAccuracyError, ValueError):
    pass


class NoCaseMass(ICAccuracyError):
    pass


class NoControlMass(ICAccuracyError):
    pass


class NoAbsoluteCases(NoCaseMass):
    pass


class NoAbsoluteControls(NoControlMass):
    pass


class NotAbsoluteCase(ICAccuracyError, ValueError):
    pass


class ZeroSurvival(ICAccuracyError):
    pass


class AllContributionsDegenerate(ICAccuracyError):
    pass


class RootNotBracketed(ICAccuracyError):
    pass


class MissingTruth(ICAccuracyError):
    pass


class ConfigError(ICAccuracyError, ValueError):
    pass
