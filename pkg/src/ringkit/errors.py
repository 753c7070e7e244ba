"""Exception hierarchy shared by all ringkit modules."""


class RingkitError(Exception):
    """Base class for all ringkit errors."""


# --- annotation model ---

class CrossingBoundaries(RingkitError):
    """Two annual ring boundaries properly intersect."""


class PithOutsideRing(RingkitError):
    """An annual closed boundary does not contain the pith."""


class DegenerateBoundary(RingkitError):
    """Polyline has zero total arc length and cannot be resampled."""


# --- geometry ---

class DegeneratePolygon(RingkitError):
    """Polygon area below the degeneracy threshold (1e-12 px^2)."""


class NegativeArea(RingkitError):
    """Area arguments violate 0 <= prev <= current."""


class ZeroPerimeter(RingkitError):
    """Perimeter must be positive for the circle similarity factor."""


class MissingPith(RingkitError):
    """Operation needs a pith location and none is set."""


class MissingScale(RingkitError):
    """Operation needs a pixel-to-millimeter calibration and none is set."""


class MissingEWBoundary(RingkitError):
    """No earlywood/latewood boundary found in the requested ring band."""


class EWBoundaryOutOfBand(RingkitError):
    """Earlywood/latewood boundary crosses one of its annual neighbours."""


# --- image processing ---

class ZeroDimension(RingkitError):
    """Requested image dimensions must be at least 1x1."""


class EmptyForeground(RingkitError):
    """No usable foreground component (>= 1% of image area) was found."""


class PithOutsideMask(RingkitError):
    """Pith location falls outside the foreground mask."""


# --- measurement ---

class LengthMismatch(RingkitError):
    """Paired series have different lengths."""


class DegenerateVariance(RingkitError):
    """A series is constant (or too short); Pearson r is undefined."""


# --- evaluation ---

class NoGroundTruth(RingkitError):
    """Ground-truth ring set is empty."""


class MissingPair(RingkitError):
    """Sample present in only one of the two evaluation directories."""


# --- i/o ---

class ParseError(RingkitError):
    """Malformed input file (carries line/column when known)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaError(RingkitError):
    """Structurally valid file that violates the annotation schema.

    ``path`` names the offending key, e.g. ``shapes[0].points``.
    """

    def __init__(self, path: str, message: str = ""):
        detail = f"{path}: {message}" if message else path
        super().__init__(detail)
        self.path = path


class VersionError(RingkitError):
    """Unsupported annotation file version."""


class EmptySeries(RingkitError):
    """Ray series has no hits to export."""


class MissingImage(RingkitError):
    """Raster image referenced by the document cannot be read."""


class ConfigError(RingkitError):
    """Invalid batch configuration (unknown or ill-typed key)."""
