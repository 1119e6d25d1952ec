"""Exception hierarchy for driftscope."""

from __future__ import annotations


class DriftscopeError(Exception):
    """Base class for all driftscope errors."""


class ConfigInvalid(DriftscopeError):
    """A configuration value is out of range or inconsistent; the message names the field."""


class NonFiniteInput(DriftscopeError):
    """An attribution vector contains NaN or Inf."""


class EmptyAfterMask(DriftscopeError):
    """Every position of an attribution vector is masked out."""


class LengthMismatch(DriftscopeError):
    """Vectors that must align have different lengths, or a vector is too short."""


class TokenMismatch(DriftscopeError):
    """Aligned attribution vectors disagree on token identity; the probe input changed."""


class IncompleteProbeCoverage(DriftscopeError):
    """An epoch is missing attributions for part of the probe set."""


class UnknownExample(DriftscopeError):
    """An example id has no label assigned."""


class EmptyCurve(DriftscopeError):
    """A drift curve with no values was supplied."""


class WindowTooLarge(DriftscopeError):
    """The stabilization window exceeds the number of drift values."""


class SpurTokenAbsent(DriftscopeError):
    """A spur-probe example does not contain its spur token."""


class SpurProbeEmpty(DriftscopeError):
    """No spur-injected examples exist to draw the spur probe set from."""


class NonFiniteLoss(DriftscopeError):
    """Training diverged: the loss became NaN or Inf."""


class NonFiniteGradient(DriftscopeError):
    """An attribution gradient came out NaN or Inf."""


class SchemaViolation(DriftscopeError):
    """A record file line does not conform to the record schema."""


class DuplicateKey(DriftscopeError):
    """Two records share the same (run_id, epoch, example_id)."""


class EpochGap(DriftscopeError):
    """The epochs present for a run do not form a contiguous range starting at 1."""
