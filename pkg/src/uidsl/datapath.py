"""Grammar for ``bindField`` data paths such as ``promotions[0].title``.

Kept separate from :mod:`uidsl.binding` so the DSL validator can check path
syntax without importing the binding machinery.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple, Union

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_DIGITS = re.compile(r"[0-9]+")


class PathSyntaxError(ValueError):
    def __init__(self, text: str, offset: int, reason: str):
        self.text = text
        self.offset = offset
        self.reason = reason
        super().__init__(f"{reason} at offset {offset} in data path {text!r}")


@dataclass(frozen=True)
class Key:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Index:
    i: int

    def __str__(self) -> str:
        return f"[{self.i}]"


Segment = Union[Key, Index]


@dataclass(frozen=True)
class DataPath:
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments or not isinstance(self.segments[0], Key):
            raise ValueError("a data path must start with a key segment")

    def __str__(self) -> str:
        out = []
        for k, seg in enumerate(self.segments):
            if isinstance(seg, Key) and k > 0:
                out.append(".")
            out.append(str(seg))
        return "".join(out)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)


def parse_path(text: str) -> DataPath:
    """Parse ``ident ( "." ident | "[" digits "]" )*`` into a :class:`DataPath`."""
    if not isinstance(text, str):
        raise TypeError(f"data path must be a string, got {type(text).__name__}")
    m = _IDENT.match(text)
    if m is None:
        raise PathSyntaxError(text, 0, "expected identifier")
    segments: list = [Key(m.group())]
    pos = m.end()
    while pos < len(text):
        ch = text[pos]
        if ch == ".":
            m = _IDENT.match(text, pos + 1)
            if m is None:
                raise PathSyntaxError(text, pos + 1, "expected identifier after '.'")
            segments.append(Key(m.group()))
            pos = m.end()
        elif ch == "[":
            m = _DIGITS.match(text, pos + 1)
            if m is None:
                raise PathSyntaxError(text, pos + 1, "expected non-negative integer index")
            end = m.end()
            if end >= len(text) or text[end] != "]":
                raise PathSyntaxError(text, end, "expected ']'")
            segments.append(Index(int(m.group())))
            pos = end + 1
        else:
            raise PathSyntaxError(text, pos, f"unexpected character {ch!r}")
    return DataPath(tuple(segments))


def is_valid_path(text: str) -> bool:
    try:
        parse_path(text)
    except (PathSyntaxError, TypeError):
        return False
    return True
