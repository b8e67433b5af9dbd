"""UI-DSL document model: parsing, canonical serialization and validation.

A document is a single JSON object describing a tree of nodes::

    {"type": "Tag", "name": "a", "className": "color-gray-500",
     "params": {"textContent": {"bindType": "Static", "value": "Test Link"}}}

``type`` is ``"Tag"`` (``name`` is an HTML tag) or ``"Component"`` (``name``
comes from a deployment's component registry). ``params`` values are either
static literals or ``Data`` bindings into a runtime data document.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Iterable, Iterator, List, Mapping, Optional, Tuple

from .datapath import PathSyntaxError, parse_path

NODE_KEYS = ("type", "name", "className", "params", "children")
PARAM_KEYS = ("bindType", "value", "bindField")


class NodeType(str, Enum):
    COMPONENT = "Component"
    TAG = "Tag"


class BindType(str, Enum):
    STATIC = "Static"
    DATA = "Data"


class DslError(ValueError):
    """Base class for documents that cannot be turned into a node tree."""


class JsonSyntaxError(DslError):
    def __init__(self, msg: str, pos: int = 0, lineno: int = 1, colno: int = 1):
        self.pos = pos
        self.lineno = lineno
        self.colno = colno
        super().__init__(f"{msg} (line {lineno}, column {colno})")


class SchemaError(DslError):
    def __init__(self, pointer: str, msg: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {msg}")


class MultipleRootsError(DslError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"document must have a single root node, found {count}")


def _is_scalar(v: Any) -> bool:
    return v is None or isinstance(v, (str, int, float, bool))


@dataclass(frozen=True)
class ParamValue:
    """One entry of a node's ``params`` map.

    Inconsistent combinations (a ``Static`` param without ``value``, a
    ``Data`` param carrying both fields, ...) are representable on purpose so
    :func:`validate` can report them instead of the parser refusing them.
    """

    bind_type: BindType
    value: Any = None
    bind_field: Optional[str] = None

    @classmethod
    def static(cls, value: Any) -> "ParamValue":
        return cls(BindType.STATIC, value=value)

    @classmethod
    def data(cls, bind_field: str) -> "ParamValue":
        return cls(BindType.DATA, bind_field=bind_field)

    @property
    def is_consistent(self) -> bool:
        if self.bind_type is BindType.STATIC:
            return self.value is not None and self.bind_field is None
        return self.bind_field is not None and self.value is None


@dataclass(frozen=True)
class DslNode:
    node_type: NodeType
    name: str
    class_name: Optional[str] = None
    params: Optional[Mapping[str, ParamValue]] = None
    children: Optional[Tuple["DslNode", ...]] = None

    def __post_init__(self):
        if not isinstance(self.node_type, NodeType):
            object.__setattr__(self, "node_type", NodeType(self.node_type))
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("node name must be a non-empty string")
        if self.params is not None:
            object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if self.children is not None:
            object.__setattr__(self, "children", tuple(self.children))

    @classmethod
    def tag(cls, name: str, class_name: Optional[str] = None, params=None, children=None) -> "DslNode":
        return cls(NodeType.TAG, name, class_name, params, children)

    @classmethod
    def component(cls, name: str, class_name: Optional[str] = None, params=None, children=None) -> "DslNode":
        return cls(NodeType.COMPONENT, name, class_name, params, children)

    def replace(self, **changes) -> "DslNode":
        kw = dict(
            node_type=self.node_type,
            name=self.name,
            class_name=self.class_name,
            params=self.params,
            children=self.children,
        )
        kw.update(changes)
        return DslNode(**kw)

    def iter_nodes(self, pointer: str = "") -> Iterator[Tuple[str, "DslNode"]]:
        """Depth-first pre-order walk yielding ``(json_pointer, node)``."""
        stack = [(pointer, self)]
        while stack:
            ptr, node = stack.pop()
            yield ptr, node
            for i in reversed(range(len(node.children or ()))):
                stack.append((f"{ptr}/children/{i}", node.children[i]))

    def count_nodes(self) -> int:
        return sum(1 for _ in self.iter_nodes())


@dataclass(frozen=True)
class Violation:
    rule_id: str
    json_pointer: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "violations": [
                {"rule_id": v.rule_id, "json_pointer": v.json_pointer, "message": v.message}
                for v in self.violations
            ],
        }


def _escape_pointer_token(token: str) -> str:
    return token.replace("~", "~0").replace("/", "~1")


def _reject_constant(name: str):
    raise ValueError(f"{name} is not valid JSON")


def loads_strict(text: str) -> Any:
    """``json.loads`` that refuses ``NaN``/``Infinity`` and maps errors to JsonSyntaxError."""
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise JsonSyntaxError(e.msg, e.pos, e.lineno, e.colno) from None
    except ValueError as e:
        raise JsonSyntaxError(str(e)) from None


def param_from_json(obj: Any, pointer: str = "") -> ParamValue:
    if isinstance(obj, ParamValue):
        return obj
    if not isinstance(obj, dict):
        raise SchemaError(pointer, "param must be an object with a bindType")
    unknown = sorted(set(obj) - set(PARAM_KEYS))
    if unknown:
        raise SchemaError(pointer, f"unknown param keys {unknown}")
    if "bindType" not in obj:
        raise SchemaError(pointer, "param is missing bindType")
    try:
        bind_type = BindType(obj["bindType"])
    except (ValueError, TypeError):
        raise SchemaError(pointer + "/bindType", f"bindType must be 'Static' or 'Data', got {obj['bindType']!r}") from None
    value = obj.get("value")
    if not _is_scalar(value):
        raise SchemaError(pointer + "/value", "param value must be a string, number, boolean or null")
    bind_field = obj.get("bindField")
    if bind_field is not None and not isinstance(bind_field, str):
        raise SchemaError(pointer + "/bindField", "bindField must be a string")
    return ParamValue(bind_type, value, bind_field)


def node_from_json(obj: Any, pointer: str = "") -> DslNode:
    """Build a :class:`DslNode` from decoded JSON, rejecting anything off-schema.

    Already-built nodes and params found in ``obj`` are taken as-is, which lets
    the streaming parser assemble a tree bottom-up without re-checking subtrees.
    """
    if isinstance(obj, DslNode):
        return obj
    if not isinstance(obj, dict):
        raise SchemaError(pointer, f"node must be an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(NODE_KEYS))
    if unknown:
        raise SchemaError(pointer, f"unknown node keys {unknown}")
    if "type" not in obj:
        raise SchemaError(pointer, "node is missing 'type'")
    try:
        node_type = NodeType(obj["type"])
    except (ValueError, TypeError):
        raise SchemaError(pointer + "/type", f"type must be 'Component' or 'Tag', got {obj['type']!r}") from None
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError(pointer + "/name", "name must be a non-empty string")
    class_name = obj.get("className")
    if class_name is not None and not isinstance(class_name, str):
        raise SchemaError(pointer + "/className", "className must be a string")

    params = None
    if "params" in obj:
        raw = obj["params"]
        if not isinstance(raw, dict):
            raise SchemaError(pointer + "/params", "params must be an object")
        params = {
            k: param_from_json(v, f"{pointer}/params/{_escape_pointer_token(k)}")
            for k, v in raw.items()
        }
    children = None
    if "children" in obj:
        raw = obj["children"]
        if not isinstance(raw, list):
            raise SchemaError(pointer + "/children", "children must be an array")
        children = tuple(node_from_json(c, f"{pointer}/children/{i}") for i, c in enumerate(raw))
    return DslNode(node_type, name, class_name, params, children)


def document_from_json(obj: Any) -> DslNode:
    if isinstance(obj, list):
        if len(obj) > 1:
            raise MultipleRootsError(len(obj))
        if not obj:
            raise SchemaError("", "document is an empty array")
        return node_from_json(obj[0], "/0")
    return node_from_json(obj)


def parse_document(text: str) -> DslNode:
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    return document_from_json(loads_strict(text))


def param_to_json(p: ParamValue) -> dict:
    out: dict = {"bindType": p.bind_type.value}
    if p.value is not None:
        out["value"] = p.value
    if p.bind_field is not None:
        out["bindField"] = p.bind_field
    return out


def node_to_json(node: DslNode) -> dict:
    out: dict = {"type": node.node_type.value, "name": node.name}
    if node.class_name is not None:
        out["className"] = node.class_name
    if node.params:
        out["params"] = {k: param_to_json(node.params[k]) for k in sorted(node.params)}
    if node.children:
        out["children"] = [node_to_json(c) for c in node.children]
    return out


def serialize(root: DslNode) -> str:
    """Canonical compact JSON; param keys are sorted, empty collections dropped."""
    return json.dumps(node_to_json(root), ensure_ascii=False, separators=(",", ":"))


def validate(root: DslNode, component_registry: Iterable[str] = frozenset()) -> ValidationReport:
    """Check every node against the DSL rules and collect all violations.

    R1  Component names must be registered.
    R2  Each param carries exactly the field its bindType requires.
    R3  Data bindings use a well-formed data path.
    R4  ``params``/``children`` are omitted rather than empty.
    """
    registry = frozenset(component_registry)
    found: List[Violation] = []
    for ptr, node in root.iter_nodes():
        if node.node_type is NodeType.COMPONENT and node.name not in registry:
            found.append(Violation("R1", ptr, f"component {node.name!r} is not in the registry"))
        if node.params is not None and not node.params:
            found.append(Violation("R4", ptr, "empty 'params' must be omitted"))
        if node.children is not None and not node.children:
            found.append(Violation("R4", ptr, "empty 'children' must be omitted"))
        for key in sorted(node.params or ()):
            p = node.params[key]
            pptr = f"{ptr}/params/{_escape_pointer_token(key)}"
            if not p.is_consistent:
                want = "value" if p.bind_type is BindType.STATIC else "bindField"
                found.append(Violation("R2", pptr, f"{p.bind_type.value} param must set exactly '{want}'"))
            if p.bind_type is BindType.DATA and p.bind_field is not None:
                try:
                    parse_path(p.bind_field)
                except PathSyntaxError as e:
                    found.append(Violation("R3", pptr + "/bindField", str(e)))
    return ValidationReport(tuple(found))
