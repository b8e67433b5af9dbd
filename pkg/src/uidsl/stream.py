"""Incremental parsing of a DSL byte stream into growing partial trees.

Feed bytes as they arrive; each :meth:`StreamParser.feed` call returns the
snapshots that became available. A snapshot is taken when

* a node becomes identifiable (its ``type`` and ``name`` are both known),
* an identifiable node gains a completed param, or
* a node closes,

provided every ancestor of that node is itself identifiable. Strings are only
surfaced once their closing quote has been read, so partially received text
never shows up in a snapshot.
"""
from __future__ import annotations

import codecs
import json
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional

from .dsl import (
    DslError,
    DslNode,
    MultipleRootsError,
    ParamValue,
    SchemaError,
    document_from_json,
    node_to_json,
    node_from_json,
    param_from_json,
    _escape_pointer_token,
)

_WS = re.compile(r"[ \t\n\r]+")
_STRING = re.compile(r'"(?:[^"\\]|\\.)*"', re.S)
_NUMBER = re.compile(r"-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_CONTROL = re.compile(r"[\x00-\x1f]")
_NUMBER_CHARS = frozenset("0123456789+-.eE")
_LITERALS = {"t": ("true", True), "f": ("false", False), "n": ("null", None)}

# what the grammar accepts next
_VALUE, _VALUE_OR_END, _KEY, _KEY_OR_END, _COLON, _COMMA_OR_END, _DONE = range(7)

# roles a container can play in the DSL tree
_NODE, _PARAMS, _PARAM, _CHILDREN, _ROOTS, _OTHER = range(6)


class StreamSyntaxError(DslError):
    def __init__(self, offset: int, msg: str):
        self.offset = offset
        super().__init__(f"{msg} at byte {offset}")


class TruncatedStreamError(DslError):
    def __init__(self, pointer: str, offset: int, msg: str = "stream ended inside an open node"):
        self.pointer = pointer
        self.offset = offset
        super().__init__(f"{msg} (deepest open node: {pointer or '/'}, {offset} bytes read)")


@dataclass(frozen=True)
class PartialTree:
    root: Optional[DslNode]
    complete: bool
    bytes_consumed: int

    def to_json(self) -> dict:
        return {
            "complete": self.complete,
            "bytes_consumed": self.bytes_consumed,
            "root": None if self.root is None else node_to_json(self.root),
        }


class _Frame:
    __slots__ = ("is_obj", "role", "pointer", "raw", "key", "identified")

    def __init__(self, is_obj: bool, role: int, pointer: str):
        self.is_obj = is_obj
        self.role = role
        self.pointer = pointer
        self.raw = {} if is_obj else []
        self.key: Optional[str] = None
        self.identified = False


def _utf8_len(s: str) -> int:
    return len(s) if s.isascii() else len(s.encode("utf-8"))


class StreamParser:
    """Single-owner incremental parser; call :meth:`feed` then :meth:`finish`."""

    def __init__(self):
        self._decoder = codecs.getincrementaldecoder("utf-8")()
        self._buf = ""
        self._offset = 0  # bytes before _buf[0]
        self._bytes_in = 0
        self._stack: List[_Frame] = []
        self._expect = _VALUE
        self._root: Optional[DslNode] = None
        self._error: Optional[Exception] = None
        self._out: List[PartialTree] = []

    @property
    def bytes_consumed(self) -> int:
        return self._offset

    @property
    def done(self) -> bool:
        return self._expect == _DONE

    def feed(self, chunk: bytes) -> List[PartialTree]:
        if self._error is not None:
            raise self._error
        if isinstance(chunk, str):
            chunk = chunk.encode("utf-8")
        try:
            try:
                text = self._decoder.decode(chunk)
            except UnicodeDecodeError as e:
                pending = len(self._decoder.getstate()[0])
                raise StreamSyntaxError(self._bytes_in - pending + e.start, "invalid UTF-8") from None
            self._bytes_in += len(chunk)
            self._buf += text
            self._run()
        except DslError as e:
            self._error = e
            raise
        out, self._out = self._out, []
        return out

    def finish(self) -> PartialTree:
        if self._error is not None:
            raise self._error
        try:
            self._decoder.decode(b"", final=True)
        except UnicodeDecodeError:
            err = TruncatedStreamError(self._deepest_open(), self._bytes_in, "stream ended inside a UTF-8 sequence")
            self._error = err
            raise err from None
        if self._expect != _DONE:
            msg = "empty stream" if self._bytes_in == 0 else "stream ended inside an open node"
            err = TruncatedStreamError(self._deepest_open(), self._bytes_in, msg)
            self._error = err
            raise err
        return PartialTree(self._root, True, self._bytes_in)

    # -- snapshots -----------------------------------------------------------

    def _deepest_open(self) -> str:
        for f in reversed(self._stack):
            if f.role == _NODE:
                return f.pointer
        return ""

    def _reachable(self) -> bool:
        return all(f.identified for f in self._stack if f.role == _NODE)

    def _project(self, i: int) -> DslNode:
        stack = self._stack
        frame = stack[i]
        raw = frame.raw
        class_name = raw.get("className")
        params = raw.get("params")
        children = raw.get("children")
        nxt = stack[i + 1] if i + 1 < len(stack) else None
        if nxt is not None and nxt.role == _PARAMS:
            params = nxt.raw or None
        elif nxt is not None and nxt.role == _CHILDREN:
            children = list(nxt.raw)
            if i + 2 < len(stack) and stack[i + 2].role == _NODE and stack[i + 2].identified:
                children.append(self._project(i + 2))
            children = children or None
        if isinstance(params, dict):
            params = {k: v for k, v in params.items() if isinstance(v, ParamValue)}
        else:
            params = None
        if isinstance(children, list):
            children = [c for c in children if isinstance(c, DslNode)]
        else:
            children = None
        return DslNode(
            raw["type"],
            raw["name"],
            class_name if isinstance(class_name, str) else None,
            params,
            children,
        )

    def _snapshot(self, end: int) -> None:
        if self._root is not None:
            root = self._root
        else:
            root = None
            for i, f in enumerate(self._stack):
                if f.role == _NODE:
                    if f.identified:
                        root = self._project(i)
                    break
                if f.role != _ROOTS:
                    break
            if root is None and self._stack and self._stack[0].role == _ROOTS:
                done = [n for n in self._stack[0].raw if isinstance(n, DslNode)]
                root = done[0] if done else root
        self._out.append(PartialTree(root, self._expect == _DONE, end))

    # -- grammar -------------------------------------------------------------

    def _child_role(self, is_obj: bool) -> tuple:
        if not self._stack:
            return (_NODE if is_obj else _ROOTS), ""
        parent = self._stack[-1]
        if parent.is_obj:
            ptr = f"{parent.pointer}/{_escape_pointer_token(parent.key)}"
            if parent.role == _NODE:
                if parent.key == "params" and is_obj:
                    return _PARAMS, ptr
                if parent.key == "children" and not is_obj:
                    return _CHILDREN, ptr
            elif parent.role == _PARAMS and is_obj:
                return _PARAM, ptr
            return _OTHER, ptr
        ptr = f"{parent.pointer}/{len(parent.raw)}"
        if parent.role in (_CHILDREN, _ROOTS) and is_obj:
            return _NODE, ptr
        return _OTHER, ptr

    def _open(self, is_obj: bool, at: int) -> None:
        if self._stack and self._stack[-1].role == _ROOTS and self._stack[-1].raw:
            raise MultipleRootsError(len(self._stack[-1].raw) + 1)
        role, ptr = self._child_role(is_obj)
        self._stack.append(_Frame(is_obj, role, ptr))
        self._expect = _KEY_OR_END if is_obj else _VALUE_OR_END

    def _close(self, is_obj: bool, end: int) -> None:
        frame = self._stack.pop()
        if frame.is_obj != is_obj:
            raise StreamSyntaxError(end - 1, "mismatched closing bracket")
        emit = False
        if frame.role == _NODE:
            value = node_from_json(frame.raw, frame.pointer)
            emit = True
        elif frame.role == _PARAM:
            value = param_from_json(frame.raw, frame.pointer)
        elif frame.role == _ROOTS:
            value = document_from_json(frame.raw)
            emit = True
        else:
            value = frame.raw
        if not self._stack:
            if frame.role not in (_NODE, _ROOTS):
                raise SchemaError("", "document root must be an object")
            self._root = value
            self._expect = _DONE
            self._snapshot(end)
            return
        self._store(value, end)
        if emit and self._reachable():
            self._snapshot(end)

    def _store(self, value, end: int) -> None:
        parent = self._stack[-1]
        self._expect = _COMMA_OR_END
        if not parent.is_obj:
            parent.raw.append(value)
            return
        key = parent.key
        parent.raw[key] = value
        if parent.role == _NODE and key in ("type", "name") and not parent.identified:
            t, name = parent.raw.get("type"), parent.raw.get("name")
            if t in ("Tag", "Component") and isinstance(name, str) and name:
                parent.identified = True
                if self._reachable():
                    self._snapshot(end)
        elif parent.role == _PARAMS and isinstance(value, ParamValue) and self._reachable():
            self._snapshot(end)

    def _scalar(self, value, end: int) -> None:
        if not self._stack:
            raise SchemaError("", "document root must be an object")
        if self._stack[-1].role == _ROOTS and self._stack[-1].raw:
            raise MultipleRootsError(len(self._stack[-1].raw) + 1)
        self._store(value, end)

    def _run(self) -> None:
        buf = self._buf
        n = len(buf)
        i = 0
        off = self._offset
        try:
            while i < n:
                c = buf[i]
                if c in " \t\n\r":
                    j = _WS.match(buf, i).end()
                    off += j - i
                    i = j
                    continue
                expect = self._expect
                if expect == _DONE:
                    raise StreamSyntaxError(off, "unexpected data after the document")
                if c == '"':
                    m = _STRING.match(buf, i)
                    if m is None:
                        break
                    token = m.group()
                    if "\\" in token or _CONTROL.search(token):
                        try:
                            s = json.loads(token)
                        except ValueError as e:
                            raise StreamSyntaxError(off, f"bad string literal ({e})") from None
                    else:
                        s = token[1:-1]
                    j = m.end()
                    end = off + _utf8_len(token)
                    if expect in (_KEY, _KEY_OR_END):
                        self._stack[-1].key = s
                        self._expect = _COLON
                    elif expect in (_VALUE, _VALUE_OR_END):
                        self._scalar(s, end)
                    else:
                        raise StreamSyntaxError(off, "unexpected string")
                    off, i = end, j
                    continue
                if c in "{[":
                    if expect not in (_VALUE, _VALUE_OR_END):
                        raise StreamSyntaxError(off, f"unexpected {c!r}")
                    self._open(c == "{", off + 1)
                elif c in "}]":
                    want = _KEY_OR_END if c == "}" else _VALUE_OR_END
                    if expect not in (want, _COMMA_OR_END) or not self._stack:
                        raise StreamSyntaxError(off, f"unexpected {c!r}")
                    self._close(c == "}", off + 1)
                elif c == ",":
                    if expect != _COMMA_OR_END:
                        raise StreamSyntaxError(off, "unexpected ','")
                    self._expect = _KEY if self._stack[-1].is_obj else _VALUE
                elif c == ":":
                    if expect != _COLON:
                        raise StreamSyntaxError(off, "unexpected ':'")
                    self._expect = _VALUE
                elif c in _NUMBER_CHARS:
                    if expect not in (_VALUE, _VALUE_OR_END):
                        raise StreamSyntaxError(off, "unexpected number")
                    j = i
                    while j < n and buf[j] in _NUMBER_CHARS:
                        j += 1
                    if j == n:
                        break  # the number may continue in the next chunk
                    m = _NUMBER.match(buf, i)
                    if m is None or m.end() != j:
                        raise StreamSyntaxError(off, "malformed number")
                    token = m.group()
                    self._scalar(json.loads(token), off + len(token))
                    off += len(token)
                    i = m.end()
                    continue
                elif c in _LITERALS:
                    word, value = _LITERALS[c]
                    if expect not in (_VALUE, _VALUE_OR_END):
                        raise StreamSyntaxError(off, f"unexpected {word!r}")
                    if not buf.startswith(word, i):
                        if word.startswith(buf[i:]):
                            break
                        raise StreamSyntaxError(off, "invalid literal")
                    self._scalar(value, off + len(word))
                    off += len(word)
                    i += len(word)
                    continue
                else:
                    raise StreamSyntaxError(off, f"unexpected character {c!r}")
                off += 1
                i += 1
        finally:
            self._buf = buf[i:]
            self._offset = off


def new_parser() -> StreamParser:
    return StreamParser()


def feed(state: StreamParser, chunk: bytes) -> List[PartialTree]:
    return state.feed(chunk)


def finish(state: StreamParser) -> PartialTree:
    return state.finish()


def iter_snapshots(chunks: Iterable[bytes]):
    """Yield every snapshot for a chunked stream, then check it terminated."""
    parser = StreamParser()
    for chunk in chunks:
        yield from parser.feed(chunk)
    parser.finish()


def chunked(data: bytes, size: int) -> List[bytes]:
    if size < 1:
        raise ValueError("chunk size must be positive")
    return [data[k : k + size] for k in range(0, len(data), size)]
