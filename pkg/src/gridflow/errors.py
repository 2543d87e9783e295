"""Exception types shared across the gridflow package."""

from __future__ import annotations


class GridflowError(Exception):
    """Base class for all gridflow errors."""


# --- workflow documents -----------------------------------------------------

class WorkflowSyntaxError(GridflowError):
    """Malformed workflow/config document (bad JSON, wrong shapes)."""

    def __init__(self, message: str, *, path: str = "") -> None:
        self.path = path
        super().__init__(f"{message}" + (f" (at {path})" if path else ""))


class UnknownActivityKind(WorkflowSyntaxError):
    def __init__(self, kind: str, *, path: str = "") -> None:
        super().__init__(f"unknown activity kind {kind!r}", path=path)
        self.kind = kind


class MissingField(WorkflowSyntaxError):
    def __init__(self, field: str, *, path: str = "") -> None:
        super().__init__(f"missing required field {field!r}", path=path)
        self.field = field


class InvalidWorkflow(GridflowError):
    """Operation requires a workflow with an empty validation report."""


# --- binding ----------------------------------------------------------------

class UnknownConcept(GridflowError):
    def __init__(self, concept: str) -> None:
        super().__init__(f"concept {concept!r} is not declared in the hierarchy")
        self.concept = concept


class NoMatchingPortType(GridflowError):
    def __init__(self, activity_id: str, concept: str) -> None:
        super().__init__(
            f"no registry service offers a port type matching concept {concept!r} "
            f"(activity {activity_id!r})"
        )
        self.activity_id = activity_id
        self.concept = concept


class NoCandidates(GridflowError):
    """Runtime binding found no usable service instance."""


# --- engine -----------------------------------------------------------------

class AbstractActivityRemains(GridflowError):
    def __init__(self, activity_id: str) -> None:
        super().__init__(f"activity {activity_id!r} still carries an abstract binding")
        self.activity_id = activity_id


class NoPendingEvents(GridflowError):
    """Event queue drained while the instance is not terminal (deadlock)."""


# --- fault tolerance / checkpoints -------------------------------------------

class NoAlternativeService(GridflowError):
    """Rebind policy exhausted the candidate list."""


class NoCheckpoint(GridflowError):
    """Restore requested but no checkpoint has been taken."""


class StorageExceeded(GridflowError):
    def __init__(self, location: str, needed: int, free: int) -> None:
        super().__init__(
            f"storage exceeded at {location!r}: need {needed} bytes, {free} free"
        )
        self.location = location
        self.needed = needed
        self.free = free


class StaleLightCheckpoint(GridflowError):
    def __init__(self, missing_lfns: list[str]) -> None:
        super().__init__(
            "light checkpoint references data no longer present: "
            + ", ".join(sorted(missing_lfns))
        )
        self.missing_lfns = sorted(missing_lfns)


class CorruptCheckpoint(GridflowError):
    """Unreadable, truncated, or wrong-version checkpoint file."""


# --- data manager -----------------------------------------------------------

class UnknownFile(GridflowError):
    def __init__(self, lfn: str) -> None:
        super().__init__(f"logical file {lfn!r} is not known")
        self.lfn = lfn


class SizeMismatch(GridflowError):
    def __init__(self, lfn: str, declared: int, offered: int) -> None:
        super().__init__(
            f"replica size for {lfn!r} conflicts: catalog has {declared}, got {offered}"
        )
        self.lfn = lfn


class Unreachable(GridflowError):
    def __init__(self, from_site: str, to_site: str) -> None:
        super().__init__(f"no link from {from_site!r} to {to_site!r}")
        self.from_site = from_site
        self.to_site = to_site


class InputUnavailable(GridflowError):
    def __init__(self, lfn: str) -> None:
        super().__init__(f"input data not available: {lfn!r}")
        self.lfn = lfn


# --- grid config ------------------------------------------------------------

class GridConfigError(GridflowError):
    """Bad grid description (duplicate sites, dangling links, bad numbers)."""
