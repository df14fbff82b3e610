"""Exception hierarchy shared by every hashsig module."""


class HashSigError(Exception):
    """Base class for all hashsig errors."""


class InvalidParameter(HashSigError, ValueError):
    pass


class PurposeMismatch(HashSigError):
    """A family key was used with a function it was not created for."""


class EntropyUnavailable(HashSigError):
    pass


class KeyAlreadyUsed(HashSigError):
    """A one-time key (or every leaf of a tree) has already produced a signature."""


class StreamExhausted(HashSigError):
    pass


class ParamMismatch(HashSigError):
    """Structural mismatch between a key and a signature, distinct from rejection."""


class MalformedData(HashSigError, ValueError):
    """Serialized input could not be parsed."""


class TreeExhausted(KeyAlreadyUsed):
    pass


class InvalidObservation(HashSigError):
    pass


class NotForgeable(HashSigError):
    pass


class PhaseViolation(HashSigError):
    pass


class FrameError(MalformedData):
    pass


class ScriptError(HashSigError, ValueError):
    pass
