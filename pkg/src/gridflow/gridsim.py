"""Deterministic simulated grid: sites, links, virtual clock, fault injection.

All randomness flows from a single 64-bit run seed. Every task attempt and
every transfer draws from its own substream, derived by hashing the seed
with the instance id, the subject id, and an attempt serial; sampled values
are therefore independent of how concurrent branches interleave.

Fault injection is per-attempt Bernoulli, sampled level by level in a fixed
order (hardware first, user last); at most one fault fires per attempt. The
default detection probabilities are survey averages over existing workflow
systems and are plain parameters here, overridable per level.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Any, Iterator

from .errors import GridConfigError, Unreachable, WorkflowSyntaxError
from .faults import FAULT_KINDS, LEVEL_ORDER, FaultLevel, RawFailure

DEFAULT_DETECTION: dict[FaultLevel, float] = {
    FaultLevel.HARDWARE: 1.0,
    FaultLevel.OPERATING_SYSTEM: 0.37,
    FaultLevel.MIDDLEWARE: 0.628,
    FaultLevel.WORKFLOW: 0.625,
    FaultLevel.TASK: 0.30,
    FaultLevel.USER: 0.25,
}


@dataclass(frozen=True)
class Site:
    site_id: str
    slots: int
    storage_capacity_bytes: int

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise GridConfigError(f"site {self.site_id!r}: slots must be >= 1")
        if self.storage_capacity_bytes < 0:
            raise GridConfigError(f"site {self.site_id!r}: negative storage capacity")


@dataclass(frozen=True)
class Link:
    from_site: str
    to_site: str
    bandwidth_bytes_per_s: float
    latency_s: float

    def __post_init__(self) -> None:
        if self.bandwidth_bytes_per_s <= 0:
            raise GridConfigError(f"link {self.from_site}->{self.to_site}: bandwidth must be > 0")
        if self.latency_s < 0:
            raise GridConfigError(f"link {self.from_site}->{self.to_site}: negative latency")
        if self.from_site == self.to_site:
            raise GridConfigError(f"self-link on {self.from_site!r}")


@dataclass(frozen=True)
class Grid:
    sites: dict[str, Site]
    links: dict[tuple[str, str], Link]

    def site(self, site_id: str) -> Site:
        try:
            return self.sites[site_id]
        except KeyError:
            raise GridConfigError(f"unknown site {site_id!r}") from None

    def link(self, from_site: str, to_site: str) -> Link:
        try:
            return self.links[(from_site, to_site)]
        except KeyError:
            raise Unreachable(from_site, to_site) from None

    def transfer_seconds(self, from_site: str, to_site: str, size_bytes: int) -> float:
        """Direct-link transfer cost: latency + size / bandwidth; 0 if local."""
        if from_site == to_site:
            return 0.0
        link = self.link(from_site, to_site)
        return link.latency_s + size_bytes / link.bandwidth_bytes_per_s


def load_grid(config_text: str) -> Grid:
    """Parse and validate a grid config document."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise WorkflowSyntaxError(f"invalid grid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sites"), list):
        raise WorkflowSyntaxError("grid config must be an object with a 'sites' array")
    sites: dict[str, Site] = {}
    for i, entry in enumerate(doc["sites"]):
        if not isinstance(entry, dict):
            raise WorkflowSyntaxError(f"sites[{i}] must be an object")
        try:
            site = Site(
                site_id=entry["site_id"],
                slots=int(entry["slots"]),
                storage_capacity_bytes=int(entry["storage_capacity_bytes"]),
            )
        except KeyError as exc:
            raise WorkflowSyntaxError(f"sites[{i}] missing field {exc.args[0]!r}") from exc
        if site.site_id in sites:
            raise GridConfigError(f"duplicate site {site.site_id!r}")
        sites[site.site_id] = site
    links: dict[tuple[str, str], Link] = {}
    raw_links = doc.get("links", [])
    if not isinstance(raw_links, list):
        raise WorkflowSyntaxError("'links' must be an array")
    for i, entry in enumerate(raw_links):
        if not isinstance(entry, dict):
            raise WorkflowSyntaxError(f"links[{i}] must be an object")
        try:
            link = Link(
                from_site=entry["from"],
                to_site=entry["to"],
                bandwidth_bytes_per_s=float(entry["bandwidth_bps"]),
                latency_s=float(entry["latency_s"]),
            )
        except KeyError as exc:
            raise WorkflowSyntaxError(f"links[{i}] missing field {exc.args[0]!r}") from exc
        for endpoint in (link.from_site, link.to_site):
            if endpoint not in sites:
                raise GridConfigError(f"link references undeclared site {endpoint!r}")
        links[(link.from_site, link.to_site)] = link
    # symmetric unless the reverse direction is listed explicitly
    for (a, b), link in list(links.items()):
        if (b, a) not in links:
            links[(b, a)] = Link(b, a, link.bandwidth_bytes_per_s, link.latency_s)
    return Grid(sites=sites, links=links)


def grid_to_json(grid: Grid) -> str:
    doc = {
        "sites": [
            {"site_id": s.site_id, "slots": s.slots, "storage_capacity_bytes": s.storage_capacity_bytes}
            for s in grid.sites.values()
        ],
        "links": [
            {"from": l.from_site, "to": l.to_site, "bandwidth_bps": l.bandwidth_bytes_per_s, "latency_s": l.latency_s}
            for l in grid.links.values()
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# --- virtual time ----------------------------------------------------------------

@dataclass(order=True)
class _HeapEntry:
    at: float
    seq: int
    payload: Any = field(compare=False)


class VirtualClock:
    """Virtual-time event heap; pop order is total by (time, insertion seq)."""

    def __init__(self, start: float = 0.0) -> None:
        self.now = start
        self._heap: list[_HeapEntry] = []
        self._seq = 0

    def schedule(self, at: float, payload: Any) -> int:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} before now={self.now}")
        self._seq += 1
        heapq.heappush(self._heap, _HeapEntry(at=at, seq=self._seq, payload=payload))
        return self._seq

    def pop(self) -> tuple[float, int, Any]:
        entry = heapq.heappop(self._heap)
        self.now = entry.at
        return entry.at, entry.seq, entry.payload

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)

    def drain(self) -> Iterator[tuple[float, int, Any]]:
        while self._heap:
            yield self.pop()


# --- seeded substreams -------------------------------------------------------------

def substream(seed: int, *parts: object) -> random.Random:
    """Derive an independent RNG from the run seed and a subject identity.

    Substreams depend only on their identity tuple, never on event
    interleaving, so replays and branch permutations sample identically.
    """
    key = "\x1f".join([str(seed)] + [str(p) for p in parts])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def task_stream(seed: int, instance_id: str, activity_id: str, attempt: int) -> random.Random:
    return substream(seed, "task", instance_id, activity_id, attempt)


def transfer_stream(seed: int, instance_id: str, subject: str, serial: int) -> random.Random:
    return substream(seed, "transfer", instance_id, subject, serial)


# --- fault injection ----------------------------------------------------------------

@dataclass(frozen=True)
class LevelConfig:
    probability_per_task: float = 0.0
    detection_probability: float = 1.0

    def __post_init__(self) -> None:
        for p in (self.probability_per_task, self.detection_probability):
            if not 0.0 <= p <= 1.0:
                raise GridConfigError(f"probability {p} outside [0, 1]")


@dataclass(frozen=True)
class FaultInjectorConfig:
    levels: dict[FaultLevel, LevelConfig]

    @classmethod
    def none(cls) -> "FaultInjectorConfig":
        return cls(levels={lv: LevelConfig(0.0, DEFAULT_DETECTION[lv]) for lv in LEVEL_ORDER})

    @classmethod
    def from_json(cls, text: str) -> "FaultInjectorConfig":
        """Parse {"os": {"p_task": 0.1, "p_detect": 0.37}, ...}; absent levels inject nothing."""
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise WorkflowSyntaxError(f"invalid fault config JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise WorkflowSyntaxError("fault config must be an object keyed by level name")
        by_name = {lv.value: lv for lv in LEVEL_ORDER}
        levels = {lv: LevelConfig(0.0, DEFAULT_DETECTION[lv]) for lv in LEVEL_ORDER}
        for name, entry in doc.items():
            if name not in by_name:
                raise WorkflowSyntaxError(
                    f"unknown fault level {name!r} (expected one of {sorted(by_name)})"
                )
            if not isinstance(entry, dict):
                raise WorkflowSyntaxError(f"fault level {name!r} must map to an object")
            lv = by_name[name]
            levels[lv] = LevelConfig(
                probability_per_task=float(entry.get("p_task", 0.0)),
                detection_probability=float(entry.get("p_detect", DEFAULT_DETECTION[lv])),
            )
        return cls(levels=levels)

    def level(self, lv: FaultLevel) -> LevelConfig:
        return self.levels[lv]


def sample_duration(service_mean: float, jitter_fraction: float, rng: random.Random) -> float:
    """Task duration: mean * (1 + u), u uniform in [-jitter, +jitter]."""
    if jitter_fraction == 0.0:
        return service_mean
    return service_mean * (1.0 + rng.uniform(-jitter_fraction, jitter_fraction))


def draw_fault(
    cfg: FaultInjectorConfig,
    activity_id: str,
    start: float,
    duration: float,
    rng: random.Random,
) -> RawFailure | None:
    """At most one injected fault per attempt; levels sampled in fixed order.

    The fault lands at a uniform time within the task's duration, with a
    uniformly chosen kind within the winning level; detection is drawn from
    that level's detection probability.
    """
    for lv in LEVEL_ORDER:
        level_cfg = cfg.levels[lv]
        if level_cfg.probability_per_task <= 0.0:
            continue
        if rng.random() >= level_cfg.probability_per_task:
            continue
        kinds = tuple(k for k in FAULT_KINDS[lv] if not (lv is FaultLevel.WORKFLOW and k == "Deadlock"))
        kind = kinds[rng.randrange(len(kinds))]
        at = start + rng.random() * duration
        detected = rng.random() < level_cfg.detection_probability
        return RawFailure(level=lv, kind=kind, detected=detected, activity_id=activity_id, at=at)
    return None


def draw_transfer_fault(
    cfg: FaultInjectorConfig,
    subject: str,
    start: float,
    duration: float,
    rng: random.Random,
) -> RawFailure | None:
    """Transfers can fail with a workflow-level data-movement fault."""
    level_cfg = cfg.levels[FaultLevel.WORKFLOW]
    if level_cfg.probability_per_task <= 0.0:
        return None
    if rng.random() >= level_cfg.probability_per_task:
        return None
    at = start + rng.random() * duration
    detected = rng.random() < level_cfg.detection_probability
    return RawFailure(
        level=FaultLevel.WORKFLOW,
        kind="DataMovementFailed",
        detected=detected,
        activity_id=subject,
        at=at,
    )
