"""Minimal BibTeX reader tuned to literature-database export files.

Handles the subset those exports actually produce: @type{key, field = value}
entries with braced, quoted, or bare values, plus # concatenation. String
macros are not expanded; LaTeX accent commands from a fixed table are decoded
and anything else is kept verbatim with a warning.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

from .errors import ParseError

# accent command -> combining codepoint (composed to NFC after application)
_ACCENTS = {
    "'": "\u0301",
    "`": "\u0300",
    "^": "\u0302",
    '"': "\u0308",
    "~": "\u0303",
    "=": "\u0304",
    ".": "\u0307",
    "c": "\u0327",
    "v": "\u030c",
    "u": "\u0306",
    "H": "\u030b",
    "k": "\u0328",
    "r": "\u030a",
    "b": "\u0331",
    "d": "\u0323",
}

# argumentless glyph macros
_GLYPHS = {
    "ss": "ß",
    "o": "ø",
    "O": "Ø",
    "ae": "æ",
    "AE": "Æ",
    "oe": "œ",
    "OE": "Œ",
    "aa": "å",
    "AA": "Å",
    "l": "ł",
    "L": "Ł",
    "i": "ı",
}

# braced alternatives first so \'{e} never leaves a stray closing brace behind
_ACCENT_RE = re.compile(
    r"\\([`'^\"~=.])\{([A-Za-z])\}"
    r"|\\([`'^\"~=.])([A-Za-z])"
    r"|\\([cvuHkrbd])\{([A-Za-z])\}"
    r"|\\([cvuHkrbd]) ([A-Za-z])"
)
_GLYPH_RE = re.compile(r"\\(ss|ae|AE|oe|OE|aa|AA|[oOlLi])(?![A-Za-z])\{?\}?")
_ESCAPE_RE = re.compile(r"\\([&%$_{}#])")
_UNKNOWN_MACRO_RE = re.compile(r"\\[A-Za-z]+")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class RawEntry:
    """One @entry as read from the file, fields undecoded beyond LaTeX cleanup."""

    entry_type: str
    key: str
    fields: dict[str, str]
    line: int


def decode_value(value: str, warnings: list[str]) -> str:
    """Fold whitespace, decode accents/glyphs, drop one brace level."""
    text = _WS_RE.sub(" ", value).strip()

    def compose(match: re.Match[str]) -> str:
        cmd = match.group(1) or match.group(3) or match.group(5) or match.group(7)
        base = match.group(2) or match.group(4) or match.group(6) or match.group(8)
        return unicodedata.normalize("NFC", base + _ACCENTS[cmd])

    text = _ACCENT_RE.sub(compose, text)
    text = _GLYPH_RE.sub(lambda m: _GLYPHS[m.group(1)], text)
    text = _ESCAPE_RE.sub(lambda m: m.group(1), text)
    for macro in _UNKNOWN_MACRO_RE.findall(text):
        warnings.append(f"unknown LaTeX macro kept verbatim: {macro}")
    text = _strip_brace_level(text)
    return _WS_RE.sub(" ", text).strip()


def _strip_brace_level(text: str) -> str:
    # remove braces at nesting depth 1; deeper braces stay untouched
    out: list[str] = []
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
            if depth == 1:
                continue
        elif ch == "}":
            if depth == 1:
                depth -= 1
                continue
            depth = max(0, depth - 1)
        out.append(ch)
    return "".join(out)


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def line(self, pos: int | None = None) -> int:
        end = self.pos if pos is None else pos
        return self.text.count("\n", 0, end) + 1

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self) -> None:
        while not self.eof() and self.text[self.pos].isspace():
            self.pos += 1

    def take_until(self, stops: str) -> str:
        start = self.pos
        while not self.eof() and self.text[self.pos] not in stops:
            self.pos += 1
        return self.text[start : self.pos]

    def expect(self, ch: str) -> None:
        if self.eof() or self.text[self.pos] != ch:
            raise ParseError(f"expected {ch!r}", self.line())
        self.pos += 1

    def braced_group(self) -> str:
        """Read one {...} group, cursor on '{'; returns inner text."""
        open_line = self.line()
        self.expect("{")
        depth = 1
        start = self.pos
        while not self.eof():
            ch = self.text[self.pos]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    inner = self.text[start : self.pos]
                    self.pos += 1
                    return inner
            self.pos += 1
        raise ParseError("unbalanced braces in entry", open_line)

    def quoted(self) -> str:
        open_line = self.line()
        self.expect('"')
        depth = 0
        start = self.pos
        while not self.eof():
            ch = self.text[self.pos]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            elif ch == '"' and depth == 0:
                inner = self.text[start : self.pos]
                self.pos += 1
                return inner
            self.pos += 1
        raise ParseError("unterminated quoted value", open_line)


def read_entries(text: str) -> tuple[list[RawEntry], list[str]]:
    """Scan a .bib file into raw entries plus warnings; raises ParseError."""
    entries: list[RawEntry] = []
    warnings: list[str] = []
    sc = _Scanner(text)
    while True:
        while not sc.eof() and sc.peek() != "@":
            sc.pos += 1
        if sc.eof():
            break
        entry_line = sc.line()
        sc.pos += 1  # consume '@'
        etype = sc.take_until("{(\n ").strip().lower()
        if not etype:
            raise ParseError("missing entry type after '@'", entry_line)
        sc.skip_ws()
        if sc.peek() != "{":
            raise ParseError(f"expected '{{' after @{etype}", sc.line())
        if etype in ("comment", "preamble"):
            sc.braced_group()
            continue
        if etype == "string":
            sc.braced_group()
            warnings.append(f"line {entry_line}: @string macros are not expanded; definition ignored")
            continue
        sc.expect("{")
        key = sc.take_until(",}\n").strip()
        if not key:
            raise ParseError("entry has no citation key", entry_line)
        fields: dict[str, str] = {}
        while True:
            sc.skip_ws()
            if sc.eof():
                raise ParseError("truncated entry (missing '}')", entry_line)
            if sc.peek() == "}":
                sc.pos += 1
                break
            if sc.peek() == ",":
                sc.pos += 1
                continue
            name = sc.take_until("=}\n").strip().lower()
            sc.skip_ws()
            if sc.peek() != "=":
                if name and sc.peek() == "}":
                    raise ParseError(f"field {name!r} has no value", sc.line())
                raise ParseError("malformed field assignment", sc.line())
            sc.expect("=")
            value = _read_value(sc, warnings)
            if name in fields:
                warnings.append(f"line {sc.line()}: duplicate field {name!r} in @{etype}{{{key}}}; last one wins")
            fields[name] = value
        entries.append(RawEntry(etype, key, fields, entry_line))
    return entries, warnings


def _read_value(sc: _Scanner, warnings: list[str]) -> str:
    """One field value: concatenation of braced/quoted/bare pieces joined by '#'."""
    pieces: list[str] = []
    while True:
        sc.skip_ws()
        if sc.eof():
            raise ParseError("truncated entry while reading a value", sc.line())
        ch = sc.peek()
        if ch == "{":
            pieces.append(sc.braced_group())
        elif ch == '"':
            pieces.append(sc.quoted())
        else:
            bare = sc.take_until(",}#\n ").strip()
            if not bare:
                raise ParseError("empty field value", sc.line())
            if not bare.isdigit():
                warnings.append(f"line {sc.line()}: unexpanded string macro {bare!r} kept verbatim")
            pieces.append(bare)
        sc.skip_ws()
        if sc.peek() == "#":
            sc.pos += 1
            continue
        return "".join(pieces)
