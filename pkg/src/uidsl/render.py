"""Deterministic HTML emission for DSL trees, batch or snapshot-by-snapshot."""
from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple, Union

from .binding import placeholder, stringify
from .dsl import BindType, DslError, DslNode, NodeType, ParamValue, parse_document, validate

DEFAULT_STYLESHEET = "tailwind.css"

VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta source track wbr".split()
)

# HTML living standard elements, used only to warn on unfamiliar tag names.
KNOWN_ELEMENTS = frozenset(
    """a abbr address area article aside audio b base bdi bdo blockquote body br button canvas
    caption cite code col colgroup data datalist dd del details dfn dialog div dl dt em embed
    fieldset figcaption figure footer form h1 h2 h3 h4 h5 h6 head header hgroup hr html i iframe
    img input ins kbd label legend li link main map mark menu meta meter nav noscript object ol
    optgroup option output p picture pre progress q rp rt ruby s samp script search section
    select slot small source span strong style sub summary sup svg table tbody td template
    textarea tfoot th thead time title tr track u ul var video wbr""".split()
)

_TAG_NAME = re.compile(r"[A-Za-z][A-Za-z0-9-]*\Z")
_ATTR_NAME = re.compile(r"[A-Za-z_:][A-Za-z0-9_:.-]*\Z")

TEXT_PARAM = "textContent"


class RenderError(DslError):
    pass


class VoidElementChildrenError(RenderError):
    def __init__(self, tag: str, pointer: str):
        self.tag = tag
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: void element <{tag}> cannot have children or text")


class InvalidTagNameError(RenderError):
    def __init__(self, tag: str, pointer: str):
        self.tag = tag
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {tag!r} is not a usable HTML tag name")


@dataclass(frozen=True)
class RenderOutput:
    html: str
    warnings: Tuple[str, ...] = field(default_factory=tuple)


def _param_text(p: ParamValue) -> Optional[str]:
    if p.bind_type is BindType.DATA:
        return placeholder(p.bind_field if p.bind_field is not None else "")
    if p.value is None:
        return None
    return p.value if isinstance(p.value, str) else stringify(p.value)


def _render_node(node: DslNode, ptr: str, out: List[str], warnings: List[str]) -> None:
    params = node.params or {}
    text = _param_text(params[TEXT_PARAM]) if TEXT_PARAM in params else None
    unbound = sorted(k for k, p in params.items() if p.bind_type is BindType.DATA)
    if unbound:
        warnings.append(f"{ptr or '/'}: unbound data params {unbound} rendered as placeholders")

    attrs: List[Tuple[str, str]] = []
    if node.class_name is not None:
        attrs.append(("class", node.class_name))
    if node.node_type is NodeType.COMPONENT:
        tag = "div"
        attrs.insert(0, ("data-component", node.name))
        prefix = "data-prop-"
    else:
        tag = node.name
        if not _TAG_NAME.match(tag):
            raise InvalidTagNameError(tag, ptr)
        if tag.lower() not in KNOWN_ELEMENTS and "-" not in tag:
            warnings.append(f"{ptr or '/'}: unknown tag <{tag}> emitted as-is")
        prefix = ""
    for key in sorted(params):
        if key == TEXT_PARAM:
            continue
        value = _param_text(params[key])
        if value is None:
            continue
        name = prefix + key
        if not _ATTR_NAME.match(name) or name == "class":
            warnings.append(f"{ptr or '/'}: param {key!r} is not a usable attribute name, skipped")
            continue
        attrs.append((name, value))

    attr_str = "".join(f' {k}="{html.escape(v, quote=True)}"' for k, v in attrs)
    if tag.lower() in VOID_ELEMENTS and node.node_type is NodeType.TAG:
        if node.children or text is not None:
            raise VoidElementChildrenError(tag, ptr)
        out.append(f"<{tag}{attr_str}/>")
        return
    out.append(f"<{tag}{attr_str}>")
    if text is not None:
        out.append(html.escape(text, quote=False))
    for i, child in enumerate(node.children or ()):
        _render_node(child, f"{ptr}/children/{i}", out, warnings)
    out.append(f"</{tag}>")


def render_fragment(root: Optional[DslNode]) -> RenderOutput:
    """HTML for the tree alone, without the surrounding document."""
    out: List[str] = []
    warnings: List[str] = []
    if root is not None:
        _render_node(root, "", out, warnings)
    return RenderOutput("".join(out), tuple(warnings))


def wrap_document(fragment: str, stylesheet_href: str = DEFAULT_STYLESHEET) -> str:
    href = html.escape(stylesheet_href, quote=True)
    return (
        "<!DOCTYPE html>\n"
        "<html>\n"
        "<head>\n"
        '<meta charset="utf-8"/>\n'
        '<meta name="viewport" content="width=device-width, initial-scale=1"/>\n'
        f'<link rel="stylesheet" href="{href}"/>\n'
        "</head>\n"
        "<body>\n"
        f"{fragment}\n"
        "</body>\n"
        "</html>\n"
    )


def render(root: Optional[DslNode], inline_stylesheet_href: str = DEFAULT_STYLESHEET) -> RenderOutput:
    frag = render_fragment(root)
    return RenderOutput(wrap_document(frag.html, inline_stylesheet_href), frag.warnings)


def render_stream(snapshots: Iterable, inline_stylesheet_href: str = DEFAULT_STYLESHEET) -> Iterator[RenderOutput]:
    """One :class:`RenderOutput` per snapshot; accepts PartialTree objects or bare roots."""
    for snap in snapshots:
        root = getattr(snap, "root", snap)
        yield render(root, inline_stylesheet_href)


def check_renderable(
    root: Union[DslNode, str, bytes], component_registry: Iterable[str] = frozenset()
) -> Tuple[bool, List[str]]:
    """True when the document parses, validates and renders without error."""
    if not isinstance(root, DslNode):
        try:
            root = parse_document(root)
        except (DslError, UnicodeDecodeError) as e:
            return False, [f"parse: {e}"]
    report = validate(root, component_registry)
    if not report.valid:
        return False, [f"{v.rule_id} {v.json_pointer or '/'}: {v.message}" for v in report.violations]
    try:
        out = render_fragment(root)
    except RenderError as e:
        return False, [str(e)]
    return True, list(out.warnings)
