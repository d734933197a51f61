"""Exception hierarchy shared by every fixlab module."""


class FixlabError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class ParseError(FixlabError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateRecordError(FixlabError):
    pass


class ValidationError(FixlabError, ValueError):
    pass


class StateError(FixlabError):
    pass


class EmptyInputError(FixlabError):
    pass


class DegenerateInputError(FixlabError):
    pass


class TooShortError(FixlabError):
    """A scan path has fewer fixations than an analysis needs."""


class ExcludedPathError(FixlabError):
    """An empty (post-preprocessing) path reached a per-path statistic."""


class ExcludedImageError(FixlabError):
    """The image has no target objects, so target statistics are undefined."""


class FormatError(FixlabError):
    pass


class DimensionError(FixlabError):
    pass


class CoverageError(FixlabError):
    def __init__(self, image_ids, message="missing gaze data for images"):
        self.image_ids = list(image_ids)
        shown = ", ".join(self.image_ids[:20])
        more = "" if len(self.image_ids) <= 20 else f" (+{len(self.image_ids) - 20} more)"
        super().__init__(f"{message}: {shown}{more}")
