from __future__ import annotations

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


class NeuraCryptException(Exception):
    """Base Exception"""

    exit_code = EXIT_DATA

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


class UsageError(NeuraCryptException):
    """Raised when a command is invoked with inconsistent arguments"""

    exit_code = EXIT_USAGE


class TooLarge(NeuraCryptException):
    """Raised when an exact enumeration would exceed its configured cap"""

    exit_code = EXIT_INFEASIBLE

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what} has {size} elements, above the cap of {cap}")
        self.what = what
        self.size = size
        self.cap = cap


class DiscreteException(NeuraCryptException):
    """Base Exception for discrete instance, family and posterior errors"""


class DuplicateImage(DiscreteException):
    """A permutation vector lists the same sample twice"""


class UnknownSample(DiscreteException):
    """A sample identifier is not part of the instance"""


class LengthMismatch(DiscreteException):
    """A vector does not have the expected length"""


class InvalidDistribution(DiscreteException):
    """Weights are negative or do not sum to one"""


class NotInFamily(DiscreteException):
    """The encoder is not a member of the family"""


class InconsistentObservation(DiscreteException):
    """No family member produces the observed label configuration"""


class ZeroEvidence(DiscreteException):
    """The conditioning event has zero probability"""


class InstanceMismatch(DiscreteException):
    """Objects built over different sample spaces were combined"""


class InvalidInstance(DiscreteException):
    """The sample space or labeling is malformed"""


class DuplicateMember(DiscreteException):
    """A family or prior lists the same entry twice"""


class EncoderException(NeuraCryptException):
    """Base Exception for encoder, key and tensor errors"""


class InvalidArch(EncoderException):
    """The architecture configuration is not realisable"""


class ShapeMismatch(EncoderException):
    """A tensor does not have the expected shape"""


class PixelRangeError(EncoderException):
    """Image pixel values fall outside [0, 1]"""


class NonFiniteOutput(EncoderException):
    """The encoder produced NaN or Inf"""


class FormatError(EncoderException):
    """A binary file is truncated or carries the wrong magic"""


class VersionError(EncoderException):
    """A key file was written by an unsupported format version"""

    def __init__(self, found: int, supported: int):
        super().__init__(f"Format version {found} is not supported (expected {supported})")
        self.found = found
        self.supported = supported


class AttackException(NeuraCryptException):
    """Base Exception for attack-suite errors"""


class DimMismatch(AttackException):
    """Vectors or models with incompatible dimensions were combined"""


class EmptySet(AttackException):
    """An operation requiring samples was given none"""


class UnsupportedModel(AttackException):
    """The attacker kind is not supported by the operation"""


class Divergence(AttackException):
    """Training produced a non-finite loss"""

    def __init__(self, step: int, loss: float):
        super().__init__(f"Loss became {loss} at step {step}")
        self.step = step
        self.loss = loss


class SingleClassData(AttackException):
    """A classifier or ROC AUC was requested on data with a single class"""


class PublicationException(NeuraCryptException):
    """Base Exception for publication workflow errors"""


class MissingLabel(PublicationException):
    """A sample to publish has no label"""


class VocabMismatch(PublicationException):
    """Owner shards disagree on task or label vocabulary"""


class SecrecyViolation(PublicationException):
    """Key material was found in a published artifact"""


class InstanceFormatError(NeuraCryptException):
    """An instance JSON document could not be parsed or validated"""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        location = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{location}{message}")
        self.line = line
        self.column = column
