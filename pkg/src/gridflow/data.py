"""Replica catalog, storage accounting, staging, placement, and cleanup.

Replicas are accounting entries (site, path, size), not real files. The
storage ledger tracks per-site usage as a step function over virtual time;
every increment corresponds to a replica registration or a heavy-checkpoint
copy and every decrement to a cleanup, so usage is reconstructible from the
event log alone.

Cleanup is footprint-driven: a logical file is deleted from every site as
soon as its last consumer has finished, unless it is a declared final
output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .binding import ServiceDescriptor
from .errors import (
    InputUnavailable,
    SizeMismatch,
    StorageExceeded,
    UnknownFile,
    Unreachable,
    WorkflowSyntaxError,
)
from .gridsim import Grid
from .workflow import Bound, Invoke, PortType, Workflow, data_dependency_graph


@dataclass
class Replica:
    site: str
    path: str
    size_bytes: int
    partial: bool = False


def _default_path(site: str, lfn: str) -> str:
    return f"/data/{site}/{lfn}"


@dataclass
class StorageLedger:
    """Per-site byte accounting over virtual time."""

    capacities: dict[str, int]
    used: dict[str, int] = field(default_factory=dict)
    history: dict[str, list[tuple[float, int]]] = field(default_factory=dict)
    peaks: dict[str, tuple[int, float]] = field(default_factory=dict)

    @classmethod
    def for_grid(cls, grid: Grid) -> "StorageLedger":
        return cls(capacities={s.site_id: s.storage_capacity_bytes for s in grid.sites.values()})

    def free_bytes(self, site: str) -> int:
        return self.capacities[site] - self.used.get(site, 0)

    def used_bytes(self, site: str) -> int:
        return self.used.get(site, 0)

    def add(self, site: str, size_bytes: int, at: float) -> None:
        if site not in self.capacities:
            raise UnknownFile(site)  # pragma: no cover - guarded by callers
        new_used = self.used.get(site, 0) + size_bytes
        if new_used > self.capacities[site]:
            raise StorageExceeded(site, size_bytes, self.free_bytes(site))
        self.used[site] = new_used
        self.history.setdefault(site, []).append((at, new_used))
        peak, _ = self.peaks.get(site, (0, 0.0))
        if new_used > peak:
            self.peaks[site] = (new_used, at)

    def remove(self, site: str, size_bytes: int, at: float) -> None:
        new_used = self.used.get(site, 0) - size_bytes
        if new_used < 0:
            raise ValueError(f"ledger underflow at {site!r}")
        self.used[site] = new_used
        self.history.setdefault(site, []).append((at, new_used))

    def peak_report(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for site in sorted(self.capacities):
            peak, at = self.peaks.get(site, (0, 0.0))
            out[site] = {"peak_bytes": peak, "at": at}
        return out


class ReplicaCatalog:
    """Logical-to-physical mappings: lfn -> replicas at sites."""

    def __init__(self) -> None:
        self.entries: dict[str, list[Replica]] = {}

    def replicas(self, lfn: str) -> list[Replica]:
        return self.entries.get(lfn, [])

    def declared_size(self, lfn: str) -> int | None:
        reps = self.entries.get(lfn)
        return reps[0].size_bytes if reps else None

    def has_replica(self, lfn: str, site: str | None = None, *, allow_partial: bool = False) -> bool:
        for rep in self.entries.get(lfn, []):
            if rep.partial and not allow_partial:
                continue
            if site is None or rep.site == site:
                return True
        return False

    def find(self, lfn: str, site: str) -> Replica | None:
        for rep in self.entries.get(lfn, []):
            if rep.site == site:
                return rep
        return None

    def to_json(self) -> str:
        doc = {
            lfn: [
                {"site": r.site, "path": r.path, "size_bytes": r.size_bytes, "partial": r.partial}
                for r in sorted(reps, key=lambda r: r.site)
            ]
            for lfn, reps in sorted(self.entries.items())
            if reps
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReplicaCatalog":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise WorkflowSyntaxError(f"invalid catalog JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise WorkflowSyntaxError("catalog must be an object keyed by lfn")
        cat = cls()
        for lfn, reps in doc.items():
            for rep in reps:
                cat.entries.setdefault(lfn, []).append(
                    Replica(
                        site=rep["site"],
                        path=rep.get("path", _default_path(rep["site"], lfn)),
                        size_bytes=int(rep["size_bytes"]),
                        partial=bool(rep.get("partial", False)),
                    )
                )
        return cat


def register_replica(
    catalog: ReplicaCatalog,
    ledger: StorageLedger,
    lfn: str,
    site: str,
    size_bytes: int,
    at: float,
    *,
    partial: bool = False,
) -> Replica:
    """Append a replica and account its bytes at the current virtual time.

    Registering the same (lfn, site) again is idempotent; a complete replica
    supersedes a partial one in place. Size conflicts with existing replicas
    raise, capacity overruns raise before any state changes.
    """
    declared = catalog.declared_size(lfn)
    if declared is not None and declared != size_bytes:
        raise SizeMismatch(lfn, declared, size_bytes)
    existing = catalog.find(lfn, site)
    if existing is not None:
        if existing.partial and not partial:
            existing.partial = False
        return existing
    ledger.add(site, size_bytes, at)
    rep = Replica(site=site, path=_default_path(site, lfn), size_bytes=size_bytes, partial=partial)
    catalog.entries.setdefault(lfn, []).append(rep)
    return rep


def remove_replica(catalog: ReplicaCatalog, ledger: StorageLedger, lfn: str, site: str, at: float) -> None:
    reps = catalog.entries.get(lfn, [])
    for rep in reps:
        if rep.site == site:
            reps.remove(rep)
            ledger.remove(site, rep.size_bytes, at)
            return
    raise UnknownFile(lfn)


def select_replica(catalog: ReplicaCatalog, lfn: str, dest_site: str, grid: Grid) -> Replica:
    """Cheapest complete replica by direct-link transfer time; ties by site id."""
    reps = [r for r in catalog.replicas(lfn) if not r.partial]
    if not reps:
        raise UnknownFile(lfn)
    best: tuple[float, str] | None = None
    chosen: Replica | None = None
    for rep in sorted(reps, key=lambda r: r.site):
        try:
            cost = grid.transfer_seconds(rep.site, dest_site, rep.size_bytes)
        except Unreachable:
            continue
        if best is None or (cost, rep.site) < best:
            best = (cost, rep.site)
            chosen = rep
    if chosen is None:
        raise Unreachable(reps[0].site, dest_site)
    return chosen


@dataclass(frozen=True)
class TransferJob:
    lfn: str
    from_site: str
    to_site: str
    size_bytes: int


def stage_in(task: Invoke, dest_site: str, catalog: ReplicaCatalog, grid: Grid) -> list[TransferJob]:
    """Transfers needed before ``task`` may execute at ``dest_site``.

    One job per input lacking a complete replica at the destination. The
    engine holds the task Ready until every transfer completes.
    """
    jobs: list[TransferJob] = []
    for lfn in task.inputs:
        if not catalog.has_replica(lfn):
            raise InputUnavailable(lfn)
        if catalog.has_replica(lfn, dest_site):
            continue
        src = select_replica(catalog, lfn, dest_site, grid)
        jobs.append(TransferJob(lfn=lfn, from_site=src.site, to_site=dest_site, size_bytes=src.size_bytes))
    return jobs


def placement_hints(
    w: Workflow,
    catalog: ReplicaCatalog,
    grid: Grid,
    registry: Iterable[ServiceDescriptor] | None = None,
) -> list[tuple[str, str]]:
    """Prefetch hints (lfn, dest_site) for workflow inputs, in consumer order.

    Covers inputs produced outside the workflow whose consumer's site is
    already decidable: the consumer is bound to a service, or its port type
    is offered by exactly one registry service. Hints follow the topological
    order of the consuming tasks so earlier tasks get their data first.
    """
    services = list(registry) if registry is not None else []
    by_id = {s.service_id: s for s in services}
    by_port: dict[str, list[ServiceDescriptor]] = {}
    for s in services:
        by_port.setdefault(s.port_type, []).append(s)

    produced = {ref.lfn for inv in w.invokes() for ref in inv.outputs}
    order = {tid: i for i, tid in enumerate(data_dependency_graph(w).topological_order())}
    invokes = sorted(w.invokes(), key=lambda inv: order[inv.id])

    hints: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for inv in invokes:
        site = _decidable_site(inv, by_id, by_port)
        if site is None:
            continue
        for lfn in inv.inputs:
            if lfn in produced:
                continue
            if catalog.has_replica(lfn, site):
                continue
            if (lfn, site) not in seen:
                seen.add((lfn, site))
                hints.append((lfn, site))
    return hints


def _decidable_site(
    inv: Invoke,
    by_id: Mapping[str, ServiceDescriptor],
    by_port: Mapping[str, list[ServiceDescriptor]],
) -> str | None:
    if isinstance(inv.binding, Bound):
        svc = by_id.get(inv.binding.service_id)
        return svc.site if svc else None
    if isinstance(inv.binding, PortType):
        offering = by_port.get(inv.binding.name, [])
        if len(offering) == 1:
            return offering[0].site
    return None


# --- cleanup -------------------------------------------------------------------

@dataclass(frozen=True)
class CleanupJob:
    lfn: str
    site: str
    size_bytes: int


class CleanupPlan:
    """Tracks, per logical file, the consumers that must finish before deletion.

    Final outputs are never planned for cleanup. ``on_task_finished``
    retires a consumer and returns deletion jobs for every file whose
    consumer set just emptied (one job per current replica).
    """

    def __init__(self, triggers: dict[str, frozenset[str]], protected: frozenset[str]) -> None:
        self.triggers = triggers
        self.protected = protected
        self.pending: dict[str, set[str]] = {lfn: set(c) for lfn, c in triggers.items()}
        self.cleaned: set[str] = set()

    def on_task_finished(self, finished_task: str, catalog: ReplicaCatalog) -> list[CleanupJob]:
        jobs: list[CleanupJob] = []
        for lfn in sorted(self.pending):
            consumers = self.pending[lfn]
            consumers.discard(finished_task)
            if not consumers and lfn not in self.cleaned:
                self.cleaned.add(lfn)
                for rep in sorted(catalog.replicas(lfn), key=lambda r: r.site):
                    jobs.append(CleanupJob(lfn=lfn, site=rep.site, size_bytes=rep.size_bytes))
        return jobs

    def remaining_consumers(self, lfn: str) -> frozenset[str]:
        return frozenset(self.pending.get(lfn, ()))


def plan_cleanup(w: Workflow) -> CleanupPlan:
    """Consumer-set cleanup triggers for every non-final file of the workflow."""
    graph_check = data_dependency_graph(w)  # raises InvalidWorkflow on bad input
    del graph_check
    triggers: dict[str, frozenset[str]] = {}
    for f in w.files:
        if f.lfn in w.final_outputs:
            continue
        consumers = frozenset(inv.id for inv in w.invokes() if f.lfn in inv.inputs)
        triggers[f.lfn] = consumers
    return CleanupPlan(triggers=triggers, protected=frozenset(w.final_outputs))


def on_task_finished(plan: CleanupPlan, finished_task: str, catalog: ReplicaCatalog) -> list[CleanupJob]:
    return plan.on_task_finished(finished_task, catalog)


# --- storage-aware placement ------------------------------------------------------

def place_task(
    task: Invoke,
    candidate_sites: list[str],
    ledger: StorageLedger,
    catalog: ReplicaCatalog,
) -> str:
    """Pick an execution site with room for the task's data.

    Sites must fit the declared outputs plus any inputs that would need
    staging in; among the survivors the one with the most free bytes wins,
    ties by site id.
    """
    if not candidate_sites:
        raise StorageExceeded("<none>", 0, 0)
    output_bytes = sum(ref.size_bytes or 0 for ref in task.outputs)
    best_site: str | None = None
    best_key: tuple[int, str] | None = None
    need_max = 0
    for site in candidate_sites:
        staged = sum(
            (catalog.declared_size(lfn) or 0)
            for lfn in task.inputs
            if not catalog.has_replica(lfn, site)
        )
        need = output_bytes + staged
        need_max = max(need_max, need)
        free = ledger.free_bytes(site)
        if free < need:
            continue
        key = (-free, site)
        if best_key is None or key < best_key:
            best_key = key
            best_site = site
    if best_site is None:
        worst_free = max(ledger.free_bytes(s) for s in candidate_sites)
        raise StorageExceeded(",".join(sorted(set(candidate_sites))), need_max, worst_free)
    return best_site


# --- provenance -----------------------------------------------------------------

@dataclass(frozen=True)
class ProvenanceRecord:
    lfn: str
    producing_activity: str
    service_id: str
    parameters: dict[str, Any]
    input_lfns: tuple[str, ...]
    produced_at: float

    def to_json(self) -> dict[str, Any]:
        return {
            "lfn": self.lfn,
            "producing_activity": self.producing_activity,
            "service_id": self.service_id,
            "parameters": dict(self.parameters),
            "input_lfns": list(self.input_lfns),
            "produced_at": self.produced_at,
        }


class ProvenanceLog:
    """One record per produced lfn per run; re-production overwrites."""

    def __init__(self) -> None:
        self.records: dict[str, ProvenanceRecord] = {}

    def record(self, rec: ProvenanceRecord) -> None:
        self.records[rec.lfn] = rec

    def to_jsonl(self) -> str:
        lines = [json.dumps(rec.to_json()) for _, rec in sorted(self.records.items())]
        return "\n".join(lines) + ("\n" if lines else "")
