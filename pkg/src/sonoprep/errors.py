"""Exception types shared across the toolkit."""


class SonoprepError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(SonoprepError, ValueError):
    """An argument violates a documented precondition."""


class FrameReadError(SonoprepError, OSError):
    """A frame file could not be read or decoded."""

    def __init__(self, path, reason: str = ""):
        self.path = str(path)
        msg = f"cannot read frame: {self.path}"
        if reason:
            msg = f"{msg} ({reason})"
        super().__init__(msg)


class EmptyRoiError(SonoprepError):
    """No foreground pixels (or no ROI patches) were found."""


class DegeneratePriorError(SonoprepError):
    """Every patch is gated to zero; the polar prior cannot be normalized."""


class InvalidMaskRatioError(SonoprepError, ValueError):
    """The mask ratio leaves zero visible or zero masked patches."""


class ManifestError(SonoprepError, ValueError):
    """The manifest is malformed or violates uniqueness constraints."""


class ConfigError(SonoprepError, ValueError):
    """The pipeline configuration is malformed or out of range."""


class EmbeddingFormatError(SonoprepError, ValueError):
    """An embedding file is malformed or contains invalid vectors."""
