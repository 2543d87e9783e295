"""Fault-tolerance policy variants and their JSON encoding.

A policy chain is an ordered list attached to an invoke activity (or to the
workflow as a default). On a detected fault the chain is walked left to
right and the first policy with remaining budget resolves the fault.
Replicate acts at dispatch time and Alert rules are threshold monitors; both
may sit in a chain alongside recovery policies.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from .errors import MissingField, WorkflowSyntaxError


class CheckpointMode(Enum):
    LIGHT = "light"
    HEAVY = "heavy"


@dataclass(frozen=True)
class Retry:
    max_attempts: int
    backoff_seconds: float = 0.0
    same_service: bool = True

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise WorkflowSyntaxError("retry max_attempts must be >= 1")
        if self.backoff_seconds < 0:
            raise WorkflowSyntaxError("retry backoff_seconds must be >= 0")


@dataclass(frozen=True)
class Rebind:
    max_alternatives: int

    def __post_init__(self) -> None:
        if self.max_alternatives < 1:
            raise WorkflowSyntaxError("rebind max_alternatives must be >= 1")


@dataclass(frozen=True)
class Replicate:
    k: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise WorkflowSyntaxError("replicate k must be >= 2")


@dataclass(frozen=True)
class CheckpointPolicy:
    mode: CheckpointMode
    every_n_completions: int

    def __post_init__(self) -> None:
        if self.every_n_completions < 1:
            raise WorkflowSyntaxError("checkpoint every_n must be >= 1")


@dataclass(frozen=True)
class SavePartial:
    pass


@dataclass(frozen=True)
class Compensate:
    pass


class AlertAction(Enum):
    EMIT = "emit"
    HOOK = "hook"


@dataclass(frozen=True)
class Alert:
    window_seconds: float
    fault_threshold: int
    action: AlertAction = AlertAction.EMIT
    hook: str = ""

    def __post_init__(self) -> None:
        if self.fault_threshold < 1:
            raise WorkflowSyntaxError("alert fault_threshold must be >= 1")
        if self.window_seconds <= 0:
            raise WorkflowSyntaxError("alert window_s must be > 0")
        if self.action is AlertAction.HOOK and not self.hook:
            raise MissingField("hook")


Policy = Retry | Rebind | Replicate | CheckpointPolicy | SavePartial | Compensate | Alert


def policy_to_json(p: Policy) -> dict[str, Any]:
    if isinstance(p, Retry):
        return {
            "policy": "retry",
            "max": p.max_attempts,
            "backoff_s": p.backoff_seconds,
            "same_service": p.same_service,
        }
    if isinstance(p, Rebind):
        return {"policy": "rebind", "max_alternatives": p.max_alternatives}
    if isinstance(p, Replicate):
        return {"policy": "replicate", "k": p.k}
    if isinstance(p, CheckpointPolicy):
        return {
            "policy": "checkpoint",
            "mode": p.mode.value,
            "every_n": p.every_n_completions,
        }
    if isinstance(p, SavePartial):
        return {"policy": "save_partial"}
    if isinstance(p, Compensate):
        return {"policy": "compensate"}
    if isinstance(p, Alert):
        out: dict[str, Any] = {
            "policy": "alert",
            "window_s": p.window_seconds,
            "fault_threshold": p.fault_threshold,
            "action": p.action.value,
        }
        if p.action is AlertAction.HOOK:
            out["hook"] = p.hook
        return out
    raise TypeError(f"not a policy: {p!r}")


def policy_from_json(obj: Any, *, path: str = "") -> Policy:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("policy must be an object", path=path)
    name = obj.get("policy")
    if name is None:
        raise MissingField("policy", path=path)
    try:
        if name == "retry":
            return Retry(
                max_attempts=int(obj["max"]),
                backoff_seconds=float(obj.get("backoff_s", 0.0)),
                same_service=bool(obj.get("same_service", True)),
            )
        if name == "rebind":
            return Rebind(max_alternatives=int(obj["max_alternatives"]))
        if name == "replicate":
            return Replicate(k=int(obj["k"]))
        if name == "checkpoint":
            return CheckpointPolicy(
                mode=CheckpointMode(obj["mode"]),
                every_n_completions=int(obj["every_n"]),
            )
        if name == "save_partial":
            return SavePartial()
        if name == "compensate":
            return Compensate()
        if name == "alert":
            return Alert(
                window_seconds=float(obj["window_s"]),
                fault_threshold=int(obj["fault_threshold"]),
                action=AlertAction(obj.get("action", "emit")),
                hook=str(obj.get("hook", "")),
            )
    except KeyError as exc:
        raise MissingField(str(exc.args[0]), path=path) from exc
    except (ValueError, TypeError) as exc:
        raise WorkflowSyntaxError(f"bad policy encoding: {exc}", path=path) from exc
    raise WorkflowSyntaxError(f"unknown policy {name!r}", path=path)


def chain_from_json(objs: Any, *, path: str = "") -> tuple[Policy, ...]:
    if not isinstance(objs, list):
        raise WorkflowSyntaxError("policy chain must be an array", path=path)
    return tuple(
        policy_from_json(o, path=f"{path}[{i}]") for i, o in enumerate(objs)
    )


def chain_to_json(chain: tuple[Policy, ...] | list[Policy]) -> list[dict[str, Any]]:
    return [policy_to_json(p) for p in chain]
