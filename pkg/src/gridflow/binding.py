"""Design-time and runtime service binding.

Design time: invoke activities referencing capability concepts are rewritten
to port types offered by the service registry (concrete workflow generation).
Runtime: a port type is resolved to one service instance, filtered by match
rules (capability, expected runtime, uptime over a trailing window) and
ranked by current load, observed failure ratio, and id.

All inputs here are immutable snapshots; every operation is pure.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping

from .errors import (
    GridConfigError,
    NoCandidates,
    NoMatchingPortType,
    UnknownConcept,
    WorkflowSyntaxError,
)
from .workflow import (
    Abstract,
    Activity,
    Flow,
    If,
    Invoke,
    PortType,
    Sequence,
    While,
    Workflow,
    validate,
)

DEFAULT_MAX_EXPECTED_SECONDS = 3600.0
DEFAULT_RELIABILITY_WINDOW_SECONDS = 259200.0  # 72 hours


@dataclass(frozen=True)
class ConceptHierarchy:
    """A set of concept names with acyclic is-a edges (child -> parent)."""

    concepts: frozenset[str]
    is_a: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        for child, parent in self.is_a:
            if child not in self.concepts or parent not in self.concepts:
                raise UnknownConcept(child if child not in self.concepts else parent)
        if self._cyclic():
            raise GridConfigError("is_a graph has a cycle")

    def _cyclic(self) -> bool:
        parents: dict[str, set[str]] = {}
        for child, parent in self.is_a:
            parents.setdefault(child, set()).add(parent)
        seen_done: set[str] = set()
        for start in self.concepts:
            path: set[str] = set()
            stack: list[tuple[str, Iterable[str]]] = [(start, iter(parents.get(start, ())))]
            path.add(start)
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    path.discard(node)
                    seen_done.add(node)
                    continue
                if nxt in path:
                    return True
                if nxt in seen_done:
                    continue
                path.add(nxt)
                stack.append((nxt, iter(parents.get(nxt, ()))))
        return False

    def parents_of(self, concept: str) -> frozenset[str]:
        return frozenset(p for c, p in self.is_a if c == concept)


def matches_concept(h: ConceptHierarchy, offered: str, requested: str) -> bool:
    """True iff ``offered`` is ``requested`` or a specialization of it."""
    if offered not in h.concepts:
        raise UnknownConcept(offered)
    if requested not in h.concepts:
        raise UnknownConcept(requested)
    if offered == requested:
        return True
    seen = {offered}
    frontier = [offered]
    while frontier:
        node = frontier.pop()
        for parent in h.parents_of(node):
            if parent == requested:
                return True
            if parent not in seen:
                seen.add(parent)
                frontier.append(parent)
    return False


@dataclass(frozen=True)
class ServiceDescriptor:
    service_id: str
    port_type: str
    capabilities: frozenset[str]
    site: str
    mean_exec_seconds: float
    exec_jitter_fraction: float = 0.0
    uptime_history: tuple[tuple[float, float], ...] = ((-math.inf, math.inf),)
    current_load: int = 0
    success_count: int = 0
    failure_count: int = 0

    def __post_init__(self) -> None:
        if self.mean_exec_seconds <= 0:
            raise GridConfigError(f"{self.service_id}: mean_exec_seconds must be > 0")
        if not 0 <= self.exec_jitter_fraction < 1:
            raise GridConfigError(f"{self.service_id}: exec_jitter_fraction must be in [0, 1)")
        prev_end = -math.inf
        for start, end in self.uptime_history:
            if start > end or start < prev_end:
                raise GridConfigError(f"{self.service_id}: uptime intervals must be sorted and disjoint")
            prev_end = end

    def failure_ratio(self) -> float:
        # +1 keeps fresh services from dividing by zero
        return self.failure_count / (self.success_count + self.failure_count + 1)

    def covers_window(self, start: float, end: float) -> bool:
        """True iff the uptime history covers [start, end] without a gap."""
        covered = start
        for s, e in self.uptime_history:
            if e < covered:
                continue
            if s > covered:
                return False
            covered = e
            if covered >= end:
                return True
        return covered >= end


@dataclass(frozen=True)
class MatchRules:
    """Service selection rules; None disables a rule.

    Defaults: operations expected to finish within one hour, offered by
    services operational over the whole trailing 72 h window.
    """

    required_concept: str | None = None
    max_expected_seconds: float | None = DEFAULT_MAX_EXPECTED_SECONDS
    reliability_window_seconds: float | None = DEFAULT_RELIABILITY_WINDOW_SECONDS


@dataclass(frozen=True)
class BindingDecision:
    activity_id: str
    candidates: tuple[str, ...]
    chosen: str
    decided_at: float

    def __post_init__(self) -> None:
        if not self.candidates:
            raise NoCandidates(f"empty candidate list for {self.activity_id}")
        if self.chosen not in self.candidates:
            raise ValueError(f"chosen {self.chosen!r} not among candidates")


def _ranking_key(svc: ServiceDescriptor) -> tuple[int, float, str]:
    return (svc.current_load, svc.failure_ratio(), svc.service_id)


def find_candidates(
    registry: Iterable[ServiceDescriptor],
    port_type: str,
    rules: MatchRules,
    now: float,
    hierarchy: ConceptHierarchy | None = None,
) -> list[str]:
    """Services of ``port_type`` satisfying every present rule, best first.

    Ordering is ascending (current_load, failure ratio, service_id). The
    concept rule needs a hierarchy for subsumption; without one, capability
    matching falls back to exact equality.
    """
    picked: list[ServiceDescriptor] = []
    for svc in registry:
        if svc.port_type != port_type:
            continue
        if rules.required_concept is not None:
            if hierarchy is not None:
                ok = any(
                    c in hierarchy.concepts and matches_concept(hierarchy, c, rules.required_concept)
                    for c in svc.capabilities
                )
            else:
                ok = rules.required_concept in svc.capabilities
            if not ok:
                continue
        if rules.max_expected_seconds is not None and svc.mean_exec_seconds > rules.max_expected_seconds:
            continue
        if rules.reliability_window_seconds is not None:
            if not svc.covers_window(now - rules.reliability_window_seconds, now):
                continue
        picked.append(svc)
    picked.sort(key=_ranking_key)
    return [svc.service_id for svc in picked]


def bind(candidates: list[str], snapshot: Mapping[str, ServiceDescriptor]) -> str:
    """Pick one service out of the candidate list against a monitoring snapshot.

    Deterministic: the first candidate under the (load, failure ratio, id)
    ordering recomputed from the snapshot.
    """
    if not candidates:
        raise NoCandidates("no service candidates to bind")
    known = [c for c in candidates if c in snapshot]
    if not known:
        raise NoCandidates("no candidate present in the monitoring snapshot")
    return min(known, key=lambda c: _ranking_key(snapshot[c]))


def generate_concrete(
    w: Workflow,
    h: ConceptHierarchy,
    registry: Iterable[ServiceDescriptor],
) -> Workflow:
    """Rewrite abstract invokes to port types (concrete workflow generation).

    For each abstract concept, the winning port type is the one offered by
    the most services whose capabilities match the concept; ties go to the
    lexicographically smallest port type name. Non-abstract activities pass
    through unchanged, so the rewrite is idempotent.
    """
    report = validate(w)
    if not report.ok:
        raise WorkflowSyntaxError("workflow does not validate: " + "; ".join(str(v) for v in report.violations))
    services = list(registry)

    def port_for(activity_id: str, concept: str) -> str:
        counts: dict[str, int] = {}
        for svc in services:
            matched = any(
                c in h.concepts and concept in h.concepts and matches_concept(h, c, concept)
                for c in svc.capabilities
            )
            if matched:
                counts[svc.port_type] = counts.get(svc.port_type, 0) + 1
        if not counts:
            raise NoMatchingPortType(activity_id, concept)
        return min(counts, key=lambda p: (-counts[p], p))

    def rewrite(act: Activity) -> Activity:
        if isinstance(act, Invoke):
            if isinstance(act.binding, Abstract):
                return replace(act, binding=PortType(port_for(act.id, act.binding.concept)))
            return act
        if isinstance(act, (Sequence, Flow)):
            return replace(act, children=tuple(rewrite(c) for c in act.children))
        if isinstance(act, If):
            return replace(
                act,
                then=rewrite(act.then),
                orelse=None if act.orelse is None else rewrite(act.orelse),
            )
        if isinstance(act, While):
            return replace(act, body=rewrite(act.body))
        return act

    return replace(w, root=rewrite(w.root), handlers=tuple(rewrite(hd) for hd in w.handlers))


def binding_report(w: Workflow, h: ConceptHierarchy, registry: Iterable[ServiceDescriptor]) -> list[dict[str, Any]]:
    """Per abstract activity: the chosen port type and its candidate services."""
    services = list(registry)
    out: list[dict[str, Any]] = []
    concrete = generate_concrete(w, h, services)
    originals = {a.id: a for a in w.activities() if isinstance(a, Invoke)}
    for act in concrete.activities():
        if not isinstance(act, Invoke):
            continue
        before = originals[act.id].binding
        if isinstance(before, Abstract) and isinstance(act.binding, PortType):
            port = act.binding.name
            cands = sorted(
                svc.service_id
                for svc in services
                if svc.port_type == port
                and any(
                    c in h.concepts and before.concept in h.concepts and matches_concept(h, c, before.concept)
                    for c in svc.capabilities
                )
            )
            out.append(
                {
                    "activity_id": act.id,
                    "concept": before.concept,
                    "port_type": port,
                    "candidates": cands,
                }
            )
    return out


# --- file formats ---------------------------------------------------------------

def hierarchy_from_json(text: str) -> ConceptHierarchy:
    """Parse {"concepts": [...], "is_a": [["child", "parent"], ...]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkflowSyntaxError(f"invalid hierarchy JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("concepts"), list):
        raise WorkflowSyntaxError("hierarchy must be an object with a 'concepts' array")
    edges = doc.get("is_a", [])
    if not isinstance(edges, list):
        raise WorkflowSyntaxError("'is_a' must be an array of [child, parent] pairs")
    parsed: list[tuple[str, str]] = []
    for e in edges:
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, str) for x in e):
            raise WorkflowSyntaxError("'is_a' entries must be [child, parent] string pairs")
        parsed.append((e[0], e[1]))
    return ConceptHierarchy(concepts=frozenset(doc["concepts"]), is_a=frozenset(parsed))


def hierarchy_to_json(h: ConceptHierarchy) -> str:
    doc = {"concepts": sorted(h.concepts), "is_a": sorted([list(e) for e in h.is_a])}
    return json.dumps(doc, indent=2) + "\n"


def registry_from_json(text: str) -> list[ServiceDescriptor]:
    """Parse a JSON array of service descriptors.

    ``uptime_history`` may be omitted (always operational) and interval ends
    may be null (still up). Counters default to zero.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkflowSyntaxError(f"invalid registry JSON: {exc.msg}") from exc
    if not isinstance(doc, list):
        raise WorkflowSyntaxError("registry must be a JSON array")
    out: list[ServiceDescriptor] = []
    ids: set[str] = set()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise WorkflowSyntaxError(f"registry[{i}] must be an object")
        try:
            uptime = entry.get("uptime_history")
            if uptime is None:
                history: tuple[tuple[float, float], ...] = ((-math.inf, math.inf),)
            else:
                history = tuple(
                    (-math.inf if s is None else float(s), math.inf if e is None else float(e))
                    for s, e in uptime
                )
            svc = ServiceDescriptor(
                service_id=entry["service_id"],
                port_type=entry["port_type"],
                capabilities=frozenset(entry.get("capabilities", [])),
                site=entry["site"],
                mean_exec_seconds=float(entry["mean_exec_seconds"]),
                exec_jitter_fraction=float(entry.get("exec_jitter_fraction", 0.0)),
                uptime_history=history,
                current_load=int(entry.get("current_load", 0)),
                success_count=int(entry.get("success_count", 0)),
                failure_count=int(entry.get("failure_count", 0)),
            )
        except KeyError as exc:
            raise WorkflowSyntaxError(f"registry[{i}] missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise WorkflowSyntaxError(f"registry[{i}]: {exc}") from exc
        if svc.service_id in ids:
            raise WorkflowSyntaxError(f"duplicate service_id {svc.service_id!r}")
        ids.add(svc.service_id)
        out.append(svc)
    return out


def registry_to_json(registry: Iterable[ServiceDescriptor]) -> str:
    rows = []
    for svc in registry:
        row = dataclasses.asdict(svc)
        row["capabilities"] = sorted(svc.capabilities)
        row["uptime_history"] = [
            [s if not math.isinf(s) else None, e if not math.isinf(e) else None]
            for s, e in svc.uptime_history
        ]
        rows.append(row)
    return json.dumps(rows, indent=2) + "\n"
