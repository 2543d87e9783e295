"""Fault taxonomy, classification, threshold alerts, and checkpoints.

Faults are classified into six levels (hardware, operating system,
middleware, task, workflow, user), each with its own kind tags and its own
default detection probability. Detected faults are handled by per-activity
policy chains; undetected ones surface later as missed deadlines.

Checkpoints come in two flavours: light checkpoints record only where the
intermediate data currently lives and become stale once any referenced
replica is deleted; heavy checkpoints copy the intermediate data into the
checkpoint store and restore unconditionally.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import CorruptCheckpoint, StorageExceeded
from .policies import Alert, CheckpointMode

CHECKPOINT_MAGIC = "GFCK"
CHECKPOINT_VERSION = 1


class FaultLevel(Enum):
    HARDWARE = "hardware"
    OPERATING_SYSTEM = "os"
    MIDDLEWARE = "middleware"
    TASK = "task"
    WORKFLOW = "workflow"
    USER = "user"


# Kind tags per level. Deadlock also appears under WORKFLOW: an engine with an
# empty event queue and a non-terminal instance reports it at workflow level.
FAULT_KINDS: dict[FaultLevel, tuple[str, ...]] = {
    FaultLevel.HARDWARE: ("MachineCrash", "NetworkDown"),
    FaultLevel.OPERATING_SYSTEM: (
        "OutOfMemory",
        "OutOfDisk",
        "FileNotFound",
        "CpuLimit",
        "DiskQuota",
        "NetworkCongestion",
    ),
    FaultLevel.MIDDLEWARE: (
        "AuthFailed",
        "SubmitFailed",
        "JobHanging",
        "JobLost",
        "TooManyRequests",
        "ServiceUnreachable",
        "StagingFailure",
    ),
    FaultLevel.TASK: (
        "MemoryLeak",
        "UncaughtException",
        "Deadlock",
        "IncorrectOutput",
        "MissingLibrary",
        "JobCrash",
    ),
    FaultLevel.WORKFLOW: (
        "DataMovementFailed",
        "InfiniteLoop",
        "InputUnavailable",
        "InputError",
        "Deadlock",
    ),
    FaultLevel.USER: ("AssertionFailed", "UserException", "MissedDeadline"),
}

# Injection samples levels in this fixed order; the first hit wins.
LEVEL_ORDER: tuple[FaultLevel, ...] = (
    FaultLevel.HARDWARE,
    FaultLevel.OPERATING_SYSTEM,
    FaultLevel.MIDDLEWARE,
    FaultLevel.TASK,
    FaultLevel.WORKFLOW,
    FaultLevel.USER,
)


@dataclass(frozen=True)
class RawFailure:
    """An injected or engine-raised failure before classification."""

    level: FaultLevel
    kind: str
    detected: bool
    activity_id: str
    at: float


@dataclass(frozen=True)
class FaultEvent:
    level: FaultLevel
    kind: str
    detected: bool
    activity_id: str
    at: float

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS[self.level]:
            raise ValueError(f"kind {self.kind!r} does not belong to level {self.level.value}")


def classify(raw: RawFailure) -> FaultEvent:
    """Map a raw failure to a classified fault event.

    The detection flag is preserved: undetected faults must not be handed
    to the policy engine, they surface later as a missed deadline.
    """
    return FaultEvent(
        level=raw.level,
        kind=raw.kind,
        detected=raw.detected,
        activity_id=raw.activity_id,
        at=raw.at,
    )


def middleware_fault(kind: str, activity_id: str, at: float) -> FaultEvent:
    return FaultEvent(FaultLevel.MIDDLEWARE, kind, True, activity_id, at)


def workflow_fault(kind: str, activity_id: str, at: float) -> FaultEvent:
    return FaultEvent(FaultLevel.WORKFLOW, kind, True, activity_id, at)


def missed_deadline(activity_id: str, at: float) -> FaultEvent:
    return FaultEvent(FaultLevel.USER, "MissedDeadline", True, activity_id, at)


# --- threshold actions ---------------------------------------------------------

@dataclass
class AlertRuleState:
    """Stateful wrapper around one Alert policy.

    The rule fires when the count of detected faults in the trailing window
    reaches the threshold, then stays quiet for one window length (edge
    triggered, to avoid alert storms).
    """

    rule: Alert
    name: str = ""
    fault_times: list[float] = field(default_factory=list)
    last_fired_at: float | None = None
    fired_count: int = 0

    def on_fault(self, at: float) -> bool:
        self.fault_times.append(at)
        if self.last_fired_at is not None and at < self.last_fired_at + self.rule.window_seconds:
            return False
        lo = at - self.rule.window_seconds
        count = sum(1 for t in self.fault_times if lo <= t <= at)
        if count >= self.rule.fault_threshold:
            self.last_fired_at = at
            self.fired_count += 1
            return True
        return False


def evaluate_actions(
    fault_times: Sequence[float],
    rules: Iterable[Alert],
) -> list[tuple[int, float]]:
    """Replay a detected-fault history against alert rules.

    Returns (rule index, fire time) pairs in chronological order, applying
    the same once-per-window suppression as the live engine.
    """
    states = [AlertRuleState(rule=r) for r in rules]
    fired: list[tuple[int, float]] = []
    for t in sorted(fault_times):
        for i, st in enumerate(states):
            if st.on_fault(t):
                fired.append((i, t))
    return fired


# --- checkpoints ----------------------------------------------------------------

@dataclass(frozen=True)
class Checkpoint:
    checkpoint_id: str
    mode: CheckpointMode
    at: float
    instance_snapshot: dict[str, Any]
    # light: lfn -> list of "site:path" strings; heavy: lfn -> {"size_bytes", "sites"}
    data: dict[str, Any]

    def bytes_copied(self) -> int:
        if self.mode is not CheckpointMode.HEAVY:
            return 0
        return sum(entry["size_bytes"] for entry in self.data.values())


class CheckpointStore:
    """Directory-backed checkpoint store with byte-capacity accounting.

    Heavy checkpoints consume store capacity (their embedded data copies);
    light checkpoints are location lists and cost nothing. Files are written
    atomically (temp file, then rename).
    """

    def __init__(self, directory: str, capacity_bytes: int | None = None) -> None:
        self.directory = directory
        self.capacity_bytes = capacity_bytes
        self.used_bytes = 0
        self._counter = 0
        self.taken: list[Checkpoint] = []

    def take(
        self,
        instance_id: str,
        mode: CheckpointMode,
        at: float,
        instance_snapshot: dict[str, Any],
        data: dict[str, Any],
    ) -> Checkpoint:
        self._counter += 1
        cp = Checkpoint(
            checkpoint_id=f"{instance_id}-{self._counter}",
            mode=mode,
            at=at,
            instance_snapshot=instance_snapshot,
            data=data,
        )
        copied = cp.bytes_copied()
        if self.capacity_bytes is not None and self.used_bytes + copied > self.capacity_bytes:
            raise StorageExceeded("checkpoint-store", copied, self.capacity_bytes - self.used_bytes)
        self.used_bytes += copied
        os.makedirs(self.directory, exist_ok=True)
        path = self.path_for(cp.checkpoint_id)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(checkpoint_to_json(cp), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
        self.taken.append(cp)
        return cp

    def path_for(self, checkpoint_id: str) -> str:
        safe = checkpoint_id.replace("/", "_")
        return os.path.join(self.directory, f"{safe}.ckpt.json")

    def latest(self) -> Checkpoint | None:
        return self.taken[-1] if self.taken else None


def checkpoint_to_json(cp: Checkpoint) -> dict[str, Any]:
    return {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "mode": cp.mode.value,
        "instance_id": cp.instance_snapshot.get("instance_id", ""),
        "t": cp.at,
        "checkpoint_id": cp.checkpoint_id,
        "instance": cp.instance_snapshot,
        "data": cp.data,
    }


def load_checkpoint(path: str) -> Checkpoint:
    """Read and verify a checkpoint file; unknown versions are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path!r}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("magic") != CHECKPOINT_MAGIC:
        raise CorruptCheckpoint(f"{path!r} is not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {doc.get('version')!r}")
    for key in ("mode", "t", "instance", "data", "checkpoint_id"):
        if key not in doc:
            raise CorruptCheckpoint(f"checkpoint missing section {key!r}")
    try:
        mode = CheckpointMode(doc["mode"])
    except ValueError as exc:
        raise CorruptCheckpoint(f"unknown checkpoint mode {doc['mode']!r}") from exc
    return Checkpoint(
        checkpoint_id=doc["checkpoint_id"],
        mode=mode,
        at=float(doc["t"]),
        instance_snapshot=doc["instance"],
        data=doc["data"],
    )
