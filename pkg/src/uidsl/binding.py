"""Resolve ``Data`` params against a runtime (or mock) data document."""
from __future__ import annotations

import enum
from typing import Any, List, Tuple

from .datapath import DataPath, Index, Key, PathSyntaxError, parse_path
from .dsl import BindType, DslNode, ParamValue

__all__ = [
    "BindPolicy",
    "BindTypeError",
    "BindingError",
    "DataPath",
    "Index",
    "Key",
    "MissingPathError",
    "PathSyntaxError",
    "bind_tree",
    "bind_tree_with_warnings",
    "parse_path",
    "placeholder",
    "resolve",
    "stringify",
]


class BindingError(LookupError):
    def __init__(self, path, msg: str):
        self.path = str(path)
        super().__init__(msg)


class MissingPathError(BindingError):
    pass


class BindTypeError(BindingError):
    pass


class BindPolicy(str, enum.Enum):
    STRICT = "strict"
    PLACEHOLDER = "placeholder"


def placeholder(path: str) -> str:
    return f"⟦missing:{path}⟧"


def stringify(value: Any) -> str:
    """Deterministic text form of a bound scalar (JSON spelling for bools)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolve(path, data: Any) -> Any:
    """Walk ``path`` through ``data`` and return the scalar leaf it addresses."""
    if isinstance(path, str):
        path = parse_path(path)
    cur = data
    for depth, seg in enumerate(path.segments):
        where = DataPath(path.segments[: depth + 1])
        if isinstance(seg, Key):
            if not isinstance(cur, dict) or seg.name not in cur:
                raise MissingPathError(path, f"no key {seg.name!r} at {where}")
            cur = cur[seg.name]
        else:
            if not isinstance(cur, list) or seg.i >= len(cur):
                raise MissingPathError(path, f"no index {seg.i} at {where}")
            cur = cur[seg.i]
    if cur is None or isinstance(cur, (dict, list)):
        kind = "null" if cur is None else type(cur).__name__
        raise BindTypeError(path, f"{path} resolves to {kind}, params bind scalars only")
    return cur


def _bind(node: DslNode, data: Any, policy: BindPolicy, warnings: List[str]) -> DslNode:
    params = node.params
    if params and any(p.bind_type is BindType.DATA for p in params.values()):
        bound = {}
        for key, p in params.items():
            if p.bind_type is not BindType.DATA:
                bound[key] = p
                continue
            try:
                value = resolve(p.bind_field, data)
            except (BindingError, PathSyntaxError, TypeError) as e:
                if policy is BindPolicy.STRICT:
                    raise
                warnings.append(f"{p.bind_field}: {e}")
                value = placeholder(p.bind_field)
            if key == "textContent" and not isinstance(value, str):
                value = stringify(value)
            bound[key] = ParamValue.static(value)
        params = bound
    children = node.children
    if children:
        children = tuple(_bind(c, data, policy, warnings) for c in children)
    if params is node.params and children is node.children:
        return node
    return node.replace(params=params, children=children)


def bind_tree_with_warnings(
    root: DslNode, data: Any, policy: BindPolicy | str = BindPolicy.STRICT
) -> Tuple[DslNode, List[str]]:
    policy = BindPolicy(policy)
    warnings: List[str] = []
    return _bind(root, data, policy, warnings), warnings


def bind_tree(root: DslNode, data: Any, policy: BindPolicy | str = BindPolicy.STRICT) -> DslNode:
    """Replace every ``Data`` param with a ``Static`` one holding the resolved value.

    Under ``strict`` the first resolution failure propagates. Under
    ``placeholder`` an unresolved param becomes the text
    ``⟦missing:<path>⟧``; use :func:`bind_tree_with_warnings` to also get the
    list of failures.
    """
    return bind_tree_with_warnings(root, data, policy)[0]
