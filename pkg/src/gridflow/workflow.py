"""Workflow document model: activities, data references, conditions, policies.

A workflow is a JSON document with a process tree under ``root``. Leaves are
invoke activities that consume and produce logical files; structured nodes
(sequence, flow, if, while) provide control flow; wait and receive provide
timed and message-driven synchronization. Invokes reference services either
abstractly (by capability concept), by port type, or by a bound service id.

Workflow values are immutable after parsing and safe to share across threads;
every operation in this module is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, Mapping

from .errors import (
    InvalidWorkflow,
    MissingField,
    UnknownActivityKind,
    UnknownFile,
    WorkflowSyntaxError,
)
from .policies import Policy, chain_from_json, chain_to_json

VARIABLE_TYPES = ("int", "bool", "string")

Literal = int | bool | str


# --- conditions ---------------------------------------------------------------

_COMPARISONS = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}

_ORDERED_OPS = ("lt", "le", "gt", "ge")


@dataclass(frozen=True)
class Comparison:
    var: str
    op: str
    value: Literal

    def __post_init__(self) -> None:
        if self.op not in _COMPARISONS:
            raise WorkflowSyntaxError(f"unknown comparison op {self.op!r}")


@dataclass(frozen=True)
class And:
    args: tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Condition", ...]


@dataclass(frozen=True)
class Not:
    arg: "Condition"


@dataclass(frozen=True)
class Const:
    value: bool


Condition = Comparison | And | Or | Not | Const


def evaluate_condition(cond: Condition, variables: Mapping[str, Literal]) -> bool:
    """Evaluate a condition against a variable assignment.

    Evaluation is total: ordered comparisons between incompatible types
    (e.g. a string variable against an int literal) yield False rather
    than raising.
    """
    if isinstance(cond, Const):
        return cond.value
    if isinstance(cond, Comparison):
        if cond.var not in variables:
            return False
        got = variables[cond.var]
        if cond.op in _ORDERED_OPS and isinstance(got, str) != isinstance(cond.value, str):
            return False
        return _COMPARISONS[cond.op](got, cond.value)
    if isinstance(cond, And):
        return all(evaluate_condition(a, variables) for a in cond.args)
    if isinstance(cond, Or):
        return any(evaluate_condition(a, variables) for a in cond.args)
    if isinstance(cond, Not):
        return not evaluate_condition(cond.arg, variables)
    raise TypeError(f"not a condition: {cond!r}")


def condition_variables(cond: Condition) -> frozenset[str]:
    if isinstance(cond, Comparison):
        return frozenset((cond.var,))
    if isinstance(cond, (And, Or)):
        return frozenset().union(*(condition_variables(a) for a in cond.args))
    if isinstance(cond, Not):
        return condition_variables(cond.arg)
    return frozenset()


# --- bindings -----------------------------------------------------------------

@dataclass(frozen=True)
class Abstract:
    concept: str


@dataclass(frozen=True)
class PortType:
    name: str


@dataclass(frozen=True)
class Bound:
    service_id: str


Binding = Abstract | PortType | Bound


# --- activities ---------------------------------------------------------------

@dataclass(frozen=True)
class OutputRef:
    lfn: str
    size_bytes: int | None


@dataclass(frozen=True)
class SetEffect:
    var: str
    value: Literal


@dataclass(frozen=True)
class Invoke:
    id: str
    binding: Binding
    inputs: tuple[str, ...] = ()
    outputs: tuple[OutputRef, ...] = ()
    sets: SetEffect | None = None
    policy_chain: tuple[Policy, ...] = ()
    compensation: str | None = None
    deadline_seconds: float | None = None

    kind = "invoke"


@dataclass(frozen=True)
class Sequence:
    id: str
    children: tuple["Activity", ...]

    kind = "sequence"


@dataclass(frozen=True)
class Flow:
    id: str
    children: tuple["Activity", ...]

    kind = "flow"


@dataclass(frozen=True)
class If:
    id: str
    condition: Condition
    then: "Activity"
    orelse: "Activity | None" = None

    kind = "if"


@dataclass(frozen=True)
class While:
    id: str
    condition: Condition
    body: "Activity"
    max_iterations: int = 1

    kind = "while"


@dataclass(frozen=True)
class Wait:
    id: str
    duration_seconds: float

    kind = "wait"


@dataclass(frozen=True)
class Receive:
    id: str
    message_name: str

    kind = "receive"


Activity = Invoke | Sequence | Flow | If | While | Wait | Receive


def children_of(act: Activity) -> tuple[Activity, ...]:
    if isinstance(act, (Sequence, Flow)):
        return act.children
    if isinstance(act, If):
        return (act.then,) if act.orelse is None else (act.then, act.orelse)
    if isinstance(act, While):
        return (act.body,)
    return ()


def iter_activities(root: Activity) -> Iterator[Activity]:
    """Pre-order walk of an activity subtree."""
    stack = [root]
    while stack:
        act = stack.pop()
        yield act
        stack.extend(reversed(children_of(act)))


# --- workflow -----------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str
    type: str
    init: Literal

    def __post_init__(self) -> None:
        if self.type not in VARIABLE_TYPES:
            raise WorkflowSyntaxError(f"unknown variable type {self.type!r}")


@dataclass(frozen=True)
class DataRef:
    lfn: str
    size_bytes: int


@dataclass(frozen=True)
class Workflow:
    id: str
    root: Activity
    variables: tuple[Variable, ...] = ()
    files: tuple[DataRef, ...] = ()
    final_outputs: frozenset[str] = frozenset()
    default_policy_chain: tuple[Policy, ...] = ()
    handlers: tuple[Activity, ...] = ()

    def activities(self) -> Iterator[Activity]:
        """All activities: the executable tree, then compensation handlers."""
        yield from iter_activities(self.root)
        for h in self.handlers:
            yield from iter_activities(h)

    def invokes(self) -> Iterator[Invoke]:
        for act in iter_activities(self.root):
            if isinstance(act, Invoke):
                yield act

    def file_sizes(self) -> dict[str, int]:
        return {f.lfn: f.size_bytes for f in self.files}

    def activity_by_id(self, activity_id: str) -> Activity:
        for act in self.activities():
            if act.id == activity_id:
                return act
        raise KeyError(activity_id)

    def producer_of(self) -> dict[str, str]:
        """Map lfn -> id of the invoke in the executable tree producing it."""
        out: dict[str, str] = {}
        for inv in self.invokes():
            for ref in inv.outputs:
                out.setdefault(ref.lfn, inv.id)
        return out


# --- validation ---------------------------------------------------------------

class ViolationKind(Enum):
    DUPLICATE_ID = "DuplicateId"
    UNDECLARED_FILE = "UndeclaredFile"
    UNDECLARED_VARIABLE = "UndeclaredVariable"
    CYCLIC_DATA_DEPENDENCY = "CyclicDataDependency"
    UNPRODUCED_FINAL_OUTPUT = "UnproducedFinalOutput"
    MULTI_PRODUCER = "MultiProducer"
    ABSTRACT_WITHOUT_CONCEPT = "AbstractWithoutConcept"
    UNKNOWN_COMPENSATION_TARGET = "UnknownCompensationTarget"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.kind.value}({self.subject})"
        return f"{msg}: {self.detail}" if self.detail else msg


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    def __bool__(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}


def validate(w: Workflow) -> ValidationReport:
    """Check a parsed workflow for semantic violations.

    An empty report means the workflow is runnable once bound: ids unique,
    every referenced file and variable declared, final outputs produced by
    exactly one invoke, the data-dependency graph acyclic, and every
    abstract binding carrying a concept.
    """
    out: list[Violation] = []
    declared_files = {f.lfn for f in w.files}
    declared_vars = {v.name for v in w.variables}

    seen_ids: set[str] = set()
    for act in w.activities():
        if act.id in seen_ids:
            out.append(Violation(ViolationKind.DUPLICATE_ID, act.id))
        seen_ids.add(act.id)

    producers: dict[str, list[str]] = {}
    handler_ids = {a.id for h in w.handlers for a in iter_activities(h)}

    for act in w.activities():
        if isinstance(act, Invoke):
            for lfn in act.inputs:
                if lfn not in declared_files:
                    out.append(Violation(ViolationKind.UNDECLARED_FILE, lfn, f"input of {act.id}"))
            for ref in act.outputs:
                if ref.lfn not in declared_files:
                    out.append(Violation(ViolationKind.UNDECLARED_FILE, ref.lfn, f"output of {act.id}"))
                producers.setdefault(ref.lfn, []).append(act.id)
            if isinstance(act.binding, Abstract) and not act.binding.concept:
                out.append(Violation(ViolationKind.ABSTRACT_WITHOUT_CONCEPT, act.id))
            if act.sets is not None and act.sets.var not in declared_vars:
                out.append(Violation(ViolationKind.UNDECLARED_VARIABLE, act.sets.var, f"set by {act.id}"))
            if act.compensation is not None and act.compensation not in handler_ids:
                out.append(
                    Violation(
                        ViolationKind.UNKNOWN_COMPENSATION_TARGET,
                        act.compensation,
                        f"referenced by {act.id}",
                    )
                )
        elif isinstance(act, (If, While)):
            for var in sorted(condition_variables(act.condition)):
                if var not in declared_vars:
                    out.append(Violation(ViolationKind.UNDECLARED_VARIABLE, var, f"condition of {act.id}"))

    for lfn, prods in sorted(producers.items()):
        if len(prods) > 1:
            out.append(Violation(ViolationKind.MULTI_PRODUCER, lfn, "produced by " + ", ".join(prods)))

    for lfn in sorted(w.final_outputs):
        if lfn not in declared_files:
            out.append(Violation(ViolationKind.UNDECLARED_FILE, lfn, "final output"))
        elif len(producers.get(lfn, [])) != 1:
            out.append(Violation(ViolationKind.UNPRODUCED_FINAL_OUTPUT, lfn))

    if _has_cycle(w):
        out.append(Violation(ViolationKind.CYCLIC_DATA_DEPENDENCY, w.id))

    return ValidationReport(tuple(out))


def _dependency_edges(w: Workflow) -> set[tuple[str, str]]:
    producer: dict[str, str] = {}
    for inv in w.invokes():
        for ref in inv.outputs:
            producer.setdefault(ref.lfn, inv.id)
    edges: set[tuple[str, str]] = set()
    for inv in w.invokes():
        for lfn in inv.inputs:
            prod = producer.get(lfn)
            if prod is not None and prod != inv.id:
                edges.add((prod, inv.id))
    return edges


def _has_cycle(w: Workflow) -> bool:
    edges = _dependency_edges(w)
    succ: dict[str, set[str]] = {}
    indeg: dict[str, int] = {}
    nodes = {inv.id for inv in w.invokes()}
    for n in nodes:
        succ[n] = set()
        indeg[n] = 0
    for a, b in edges:
        succ[a].add(b)
        indeg[b] += 1
    ready = sorted(n for n in nodes if indeg[n] == 0)
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen != len(nodes)


@dataclass(frozen=True)
class DependencyGraph:
    """Task-level data-dependency DAG: edge (a, b) iff b consumes an output of a."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def successors(self, node: str) -> frozenset[str]:
        return frozenset(b for a, b in self.edges if a == node)

    def predecessors(self, node: str) -> frozenset[str]:
        return frozenset(a for a, b in self.edges if b == node)

    def topological_order(self) -> list[str]:
        indeg = {n: 0 for n in self.nodes}
        for _, b in self.edges:
            indeg[b] += 1
        ready = sorted((n for n in self.nodes if indeg[n] == 0), reverse=True)
        order: list[str] = []
        while ready:
            n = ready.pop()
            order.append(n)
            for m in sorted(self.successors(n), reverse=True):
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
            ready.sort(reverse=True)
        if len(order) != len(self.nodes):
            raise InvalidWorkflow("dependency graph has a cycle")
        return order


def data_dependency_graph(w: Workflow) -> DependencyGraph:
    report = validate(w)
    if not report.ok:
        raise InvalidWorkflow("; ".join(str(v) for v in report.violations))
    return DependencyGraph(
        nodes=frozenset(inv.id for inv in w.invokes()),
        edges=frozenset(_dependency_edges(w)),
    )


def consumers_of(w: Workflow, lfn: str) -> frozenset[str]:
    """Invoke ids in the executable tree listing ``lfn`` among their inputs."""
    if lfn not in {f.lfn for f in w.files}:
        raise UnknownFile(lfn)
    return frozenset(inv.id for inv in w.invokes() if lfn in inv.inputs)


# --- parsing ------------------------------------------------------------------

def parse_workflow(text: str) -> Workflow:
    """Parse a workflow definition document.

    Only syntax and shape are checked here; semantic problems (duplicate
    ids, undeclared files, cycles) are reported by :func:`validate`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkflowSyntaxError(f"invalid JSON: {exc.msg} (line {exc.lineno} col {exc.colno})") from exc
    if not isinstance(doc, dict):
        raise WorkflowSyntaxError("top level must be an object")

    wf_id = _req_str(doc, "id", path="$")
    variables = tuple(
        _parse_variable(v, path=f"$.variables[{i}]")
        for i, v in enumerate(_opt_list(doc, "variables", path="$"))
    )
    files = tuple(
        _parse_dataref(f, path=f"$.files[{i}]")
        for i, f in enumerate(_opt_list(doc, "files", path="$"))
    )
    finals = _opt_list(doc, "final_outputs", path="$")
    for i, lfn in enumerate(finals):
        if not isinstance(lfn, str):
            raise WorkflowSyntaxError("final_outputs entries must be strings", path=f"$.final_outputs[{i}]")
    if "root" not in doc:
        raise MissingField("root", path="$")
    sizes = {f.lfn: f.size_bytes for f in files}
    root = _parse_activity(doc["root"], sizes, path="$.root")
    handlers = tuple(
        _parse_activity(h, sizes, path=f"$.handlers[{i}]")
        for i, h in enumerate(_opt_list(doc, "handlers", path="$"))
    )
    chain = chain_from_json(doc.get("default_policy_chain", []), path="$.default_policy_chain")
    return Workflow(
        id=wf_id,
        root=root,
        variables=variables,
        files=files,
        final_outputs=frozenset(finals),
        default_policy_chain=chain,
        handlers=handlers,
    )


def parse_workflow_file(path: str) -> Workflow:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_workflow(fh.read())


def _req_str(obj: dict, key: str, *, path: str) -> str:
    if key not in obj:
        raise MissingField(key, path=path)
    val = obj[key]
    if not isinstance(val, str) or not val:
        raise WorkflowSyntaxError(f"field {key!r} must be a non-empty string", path=path)
    return val


def _opt_list(obj: dict, key: str, *, path: str) -> list:
    val = obj.get(key, [])
    if not isinstance(val, list):
        raise WorkflowSyntaxError(f"field {key!r} must be an array", path=path)
    return val


def _parse_literal(val: Any, *, path: str) -> Literal:
    if isinstance(val, bool) or isinstance(val, int) or isinstance(val, str):
        return val
    raise WorkflowSyntaxError("literal must be an integer, boolean, or string", path=path)


def _parse_variable(obj: Any, *, path: str) -> Variable:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("variable must be an object", path=path)
    name = _req_str(obj, "name", path=path)
    vtype = _req_str(obj, "type", path=path)
    if vtype not in VARIABLE_TYPES:
        raise WorkflowSyntaxError(f"unknown variable type {vtype!r}", path=path)
    if "init" not in obj:
        raise MissingField("init", path=path)
    return Variable(name=name, type=vtype, init=_parse_literal(obj["init"], path=path))


def _parse_dataref(obj: Any, *, path: str) -> DataRef:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("file entry must be an object", path=path)
    lfn = _req_str(obj, "lfn", path=path)
    size = obj.get("size_bytes")
    if not isinstance(size, int) or isinstance(size, bool) or size < 0:
        raise WorkflowSyntaxError("size_bytes must be a non-negative integer", path=path)
    return DataRef(lfn=lfn, size_bytes=size)


def _parse_condition(obj: Any, *, path: str) -> Condition:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("condition must be an object", path=path)
    if "const" in obj:
        if not isinstance(obj["const"], bool):
            raise WorkflowSyntaxError("const must be a boolean", path=path)
        return Const(obj["const"])
    op = obj.get("op")
    if op is None:
        raise MissingField("op", path=path)
    if op in ("and", "or"):
        args = obj.get("args")
        if not isinstance(args, list) or not args:
            raise WorkflowSyntaxError(f"{op} needs a non-empty args array", path=path)
        parsed = tuple(_parse_condition(a, path=f"{path}.args[{i}]") for i, a in enumerate(args))
        return And(parsed) if op == "and" else Or(parsed)
    if op == "not":
        if "arg" not in obj:
            raise MissingField("arg", path=path)
        return Not(_parse_condition(obj["arg"], path=f"{path}.arg"))
    if op in _COMPARISONS:
        var = _req_str(obj, "var", path=path)
        if "value" not in obj:
            raise MissingField("value", path=path)
        return Comparison(var=var, op=op, value=_parse_literal(obj["value"], path=path))
    raise WorkflowSyntaxError(f"unknown condition op {op!r}", path=path)


def _parse_binding(obj: Any, *, path: str) -> Binding:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("binding must be an object", path=path)
    keys = [k for k in ("abstract", "port_type", "service") if k in obj]
    if len(keys) != 1:
        raise WorkflowSyntaxError(
            "binding must have exactly one of 'abstract', 'port_type', 'service'", path=path
        )
    key = keys[0]
    val = obj[key]
    if not isinstance(val, str):
        raise WorkflowSyntaxError(f"binding {key!r} must be a string", path=path)
    if key == "abstract":
        return Abstract(val)
    if key == "port_type":
        return PortType(val)
    return Bound(val)


def _parse_outputs(val: Any, sizes: dict[str, int], *, path: str) -> tuple[OutputRef, ...]:
    if not isinstance(val, list):
        raise WorkflowSyntaxError("outputs must be an array", path=path)
    out: list[OutputRef] = []
    for i, entry in enumerate(val):
        p = f"{path}[{i}]"
        if isinstance(entry, str):
            out.append(OutputRef(lfn=entry, size_bytes=sizes.get(entry)))
        elif isinstance(entry, dict):
            lfn = _req_str(entry, "lfn", path=p)
            inline = entry.get("size_bytes")
            if inline is not None:
                if not isinstance(inline, int) or isinstance(inline, bool) or inline < 0:
                    raise WorkflowSyntaxError("size_bytes must be a non-negative integer", path=p)
                declared = sizes.get(lfn)
                if declared is not None and declared != inline:
                    raise WorkflowSyntaxError(
                        f"output size {inline} for {lfn!r} conflicts with files entry {declared}", path=p
                    )
                out.append(OutputRef(lfn=lfn, size_bytes=inline))
            else:
                out.append(OutputRef(lfn=lfn, size_bytes=sizes.get(lfn)))
        else:
            raise WorkflowSyntaxError("output entry must be a string or object", path=p)
    return tuple(out)


def _parse_activity(obj: Any, sizes: dict[str, int], *, path: str) -> Activity:
    if not isinstance(obj, dict):
        raise WorkflowSyntaxError("activity must be an object", path=path)
    act_id = _req_str(obj, "id", path=path)
    kind = _req_str(obj, "kind", path=path)

    if kind == "invoke":
        if "binding" not in obj:
            raise MissingField("binding", path=path)
        inputs = _opt_list(obj, "inputs", path=path)
        for i, lfn in enumerate(inputs):
            if not isinstance(lfn, str):
                raise WorkflowSyntaxError("inputs entries must be strings", path=f"{path}.inputs[{i}]")
        sets_obj = obj.get("sets")
        sets = None
        if sets_obj is not None:
            if not isinstance(sets_obj, dict):
                raise WorkflowSyntaxError("sets must be an object", path=path)
            sets = SetEffect(
                var=_req_str(sets_obj, "var", path=f"{path}.sets"),
                value=_parse_literal(sets_obj.get("value"), path=f"{path}.sets"),
            )
        deadline = obj.get("deadline_s")
        if deadline is not None:
            if not isinstance(deadline, (int, float)) or isinstance(deadline, bool) or deadline <= 0:
                raise WorkflowSyntaxError("deadline_s must be a positive number", path=path)
            deadline = float(deadline)
        comp = obj.get("compensation")
        if comp is not None and not isinstance(comp, str):
            raise WorkflowSyntaxError("compensation must be an activity id string", path=path)
        return Invoke(
            id=act_id,
            binding=_parse_binding(obj["binding"], path=f"{path}.binding"),
            inputs=tuple(inputs),
            outputs=_parse_outputs(obj.get("outputs", []), sizes, path=f"{path}.outputs"),
            sets=sets,
            policy_chain=chain_from_json(obj.get("policy_chain", []), path=f"{path}.policy_chain"),
            compensation=comp,
            deadline_seconds=deadline,
        )
    if kind in ("sequence", "flow"):
        kids = _opt_list(obj, "children", path=path)
        children = tuple(
            _parse_activity(c, sizes, path=f"{path}.children[{i}]") for i, c in enumerate(kids)
        )
        cls = Sequence if kind == "sequence" else Flow
        return cls(id=act_id, children=children)
    if kind == "if":
        if "condition" not in obj:
            raise MissingField("condition", path=path)
        if "then" not in obj:
            raise MissingField("then", path=path)
        orelse = obj.get("else")
        return If(
            id=act_id,
            condition=_parse_condition(obj["condition"], path=f"{path}.condition"),
            then=_parse_activity(obj["then"], sizes, path=f"{path}.then"),
            orelse=None if orelse is None else _parse_activity(orelse, sizes, path=f"{path}.else"),
        )
    if kind == "while":
        if "condition" not in obj:
            raise MissingField("condition", path=path)
        if "body" not in obj:
            raise MissingField("body", path=path)
        max_iter = obj.get("max_iterations")
        if not isinstance(max_iter, int) or isinstance(max_iter, bool) or max_iter < 1:
            raise WorkflowSyntaxError("max_iterations must be a positive integer", path=path)
        return While(
            id=act_id,
            condition=_parse_condition(obj["condition"], path=f"{path}.condition"),
            body=_parse_activity(obj["body"], sizes, path=f"{path}.body"),
            max_iterations=max_iter,
        )
    if kind == "wait":
        dur = obj.get("duration_s")
        if not isinstance(dur, (int, float)) or isinstance(dur, bool) or dur < 0:
            raise WorkflowSyntaxError("duration_s must be a non-negative number", path=path)
        return Wait(id=act_id, duration_seconds=float(dur))
    if kind == "receive":
        return Receive(id=act_id, message_name=_req_str(obj, "message", path=path))
    raise UnknownActivityKind(kind, path=path)


# --- serialization ------------------------------------------------------------

def serialize_workflow(w: Workflow) -> str:
    """Render a workflow back to its document form.

    The output is canonical (stable field order, two-space indent), so
    ``parse_workflow(serialize_workflow(w)) == w`` and repeated serialization
    is byte-identical.
    """
    doc: dict[str, Any] = {"id": w.id}
    doc["variables"] = [{"name": v.name, "type": v.type, "init": v.init} for v in w.variables]
    doc["files"] = [{"lfn": f.lfn, "size_bytes": f.size_bytes} for f in w.files]
    doc["final_outputs"] = sorted(w.final_outputs)
    doc["root"] = _activity_to_json(w.root)
    if w.handlers:
        doc["handlers"] = [_activity_to_json(h) for h in w.handlers]
    if w.default_policy_chain:
        doc["default_policy_chain"] = chain_to_json(w.default_policy_chain)
    return json.dumps(doc, indent=2) + "\n"


def _condition_to_json(cond: Condition) -> dict[str, Any]:
    if isinstance(cond, Const):
        return {"const": cond.value}
    if isinstance(cond, Comparison):
        return {"op": cond.op, "var": cond.var, "value": cond.value}
    if isinstance(cond, And):
        return {"op": "and", "args": [_condition_to_json(a) for a in cond.args]}
    if isinstance(cond, Or):
        return {"op": "or", "args": [_condition_to_json(a) for a in cond.args]}
    return {"op": "not", "arg": _condition_to_json(cond.arg)}


def _binding_to_json(b: Binding) -> dict[str, str]:
    if isinstance(b, Abstract):
        return {"abstract": b.concept}
    if isinstance(b, PortType):
        return {"port_type": b.name}
    return {"service": b.service_id}


def _activity_to_json(act: Activity) -> dict[str, Any]:
    out: dict[str, Any] = {"id": act.id, "kind": act.kind}
    if isinstance(act, Invoke):
        out["binding"] = _binding_to_json(act.binding)
        out["inputs"] = list(act.inputs)
        out["outputs"] = [
            {"lfn": r.lfn} if r.size_bytes is None else {"lfn": r.lfn, "size_bytes": r.size_bytes}
            for r in act.outputs
        ]
        if act.sets is not None:
            out["sets"] = {"var": act.sets.var, "value": act.sets.value}
        if act.policy_chain:
            out["policy_chain"] = chain_to_json(act.policy_chain)
        if act.compensation is not None:
            out["compensation"] = act.compensation
        if act.deadline_seconds is not None:
            out["deadline_s"] = act.deadline_seconds
    elif isinstance(act, (Sequence, Flow)):
        out["children"] = [_activity_to_json(c) for c in act.children]
    elif isinstance(act, If):
        out["condition"] = _condition_to_json(act.condition)
        out["then"] = _activity_to_json(act.then)
        if act.orelse is not None:
            out["else"] = _activity_to_json(act.orelse)
    elif isinstance(act, While):
        out["condition"] = _condition_to_json(act.condition)
        out["body"] = _activity_to_json(act.body)
        out["max_iterations"] = act.max_iterations
    elif isinstance(act, Wait):
        out["duration_s"] = act.duration_seconds
    elif isinstance(act, Receive):
        out["message"] = act.message_name
    return out
