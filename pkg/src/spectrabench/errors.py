"""Exception hierarchy shared across the toolkit.

``SpectraBenchError`` is the root; the CLI maps it to exit code 1 and
everything else (bugs) escapes as a traceback. Parse errors carry enough
context (file, line, token) to locate the offending input.
"""

from __future__ import annotations


class SpectraBenchError(Exception):
    """Base class for all domain errors raised by this package."""


class ManifestUnreadable(SpectraBenchError):
    pass


class SplitMissing(SpectraBenchError):
    pass


class IoFailure(SpectraBenchError):
    pass


class LutAssetError(SpectraBenchError):
    """Colormap asset missing, corrupt, or failing its checksum."""


class ParameterError(SpectraBenchError):
    """Invalid transform or evaluation parameters."""


class NegativeInput(ParameterError):
    pass


class EmptyInput(SpectraBenchError):
    pass


class DuplicateModalityName(SpectraBenchError):
    pass


class UnknownImageId(SpectraBenchError):
    pass


class InstanceTooLarge(SpectraBenchError):
    """Brute-force oracle refused an instance above its size cap."""


class AnnotationParseError(SpectraBenchError):
    """Base for per-line parse failures in label/prediction files.

    ``line_no`` is 1-based; ``token`` is the offending token when one can
    be singled out. ``path`` is attached by the file-level readers.
    """

    def __init__(self, reason: str, *, line_no: int = 0, token: str | None = None,
                 path: str | None = None):
        self.reason = reason
        self.line_no = line_no
        self.token = token
        self.path = path
        super().__init__(self._format())

    def _format(self) -> str:
        where = f"{self.path or '<string>'}:{self.line_no}" if self.line_no else (self.path or "<string>")
        tok = f" (token {self.token!r})" if self.token is not None else ""
        return f"{where}: {self.reason}{tok}"

    def with_context(self, path: str, line_no: int | None = None) -> "AnnotationParseError":
        """Rebuild the error with file context attached."""
        return type(self)(self.reason, line_no=line_no if line_no is not None else self.line_no,
                          token=self.token, path=path)


class WrongTokenCount(AnnotationParseError):
    pass


class NonNumericToken(AnnotationParseError):
    pass


class ClassIdOutOfRange(AnnotationParseError):
    pass


class CoordinateOutOfRange(AnnotationParseError):
    pass


class ConfidenceOutOfRange(AnnotationParseError):
    pass
