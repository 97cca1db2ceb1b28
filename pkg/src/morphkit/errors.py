"""Exception hierarchy shared by all morphkit modules.

Everything derives from :class:`MorphkitError` so batch drivers can catch one
type, record the failure, and keep going.
"""


class MorphkitError(ValueError):
    """Base class for all morphkit errors."""


# imaging
class ImageTooSmall(MorphkitError):
    """Image is smaller than the 2x2 minimum needed for gradients."""


class OutOfBounds(MorphkitError):
    """Sub-pixel sample coordinate falls outside the field domain."""


class DegeneratePolygon(MorphkitError):
    """Polygon has fewer than 3 vertices or zero area."""


# pseudo-mask generation
class NoComponentFound(MorphkitError):
    """No connected component passed the prior filters."""


class EmptyMask(MorphkitError):
    """Mask has no foreground pixels."""


# contour extraction / sampling
class TooSmall(MorphkitError):
    """Foreground component is too small to trace (area < 4)."""


class MultipleComponents(MorphkitError):
    """Mask contains more than one foreground component."""


class BadN(MorphkitError):
    """Contour sample count n is below the minimum of 4."""


class BadM(MorphkitError):
    """Per-line sample count m is even or below the minimum of 3."""


class BadParams(MorphkitError):
    """Invalid refinement or prior parameter combination."""


# refinement graph / DP
class DimensionMismatch(MorphkitError):
    """Field, fan, and parameter dimensions disagree."""


class TooLarge(MorphkitError):
    """Instance exceeds the exhaustive-enumeration guard (n <= 8, m <= 5)."""


class RefinementError(MorphkitError):
    """Refined curve could not be turned into a valid single-component mask."""


# mixup / losses
class LabelMismatch(MorphkitError):
    """Attempted to mix two samples with different majority labels."""


class BadGamma(MorphkitError):
    """Majority-label weight gamma outside [0, 1]."""


class EmptyDataset(MorphkitError):
    """Operation requires at least one sample."""


# metrics
class LengthMismatch(MorphkitError):
    """Prediction and truth sequences differ in length."""


class EmptyInput(MorphkitError):
    """Metric computation requires at least one prediction."""
