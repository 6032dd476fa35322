"""Tokenizer and logical-line reader for command input.

Input decks are line oriented.  A physical line ending in ``&`` continues on
the next line; the merged result is one logical line.  Within a line, ``#``
starts a comment unless it sits inside a double-quoted group, tokens are
whitespace separated, and a double-quoted group forms a single token with
the quotes removed.  Column positions are 0-based and refer to the line as
given (after variable expansion, before comment removal), which is what the
caret error reporter needs to underline the right characters.

Command input is ASCII by contract.  Non-ASCII characters outside comments
are rejected up front so column arithmetic stays byte-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .errors import (
    E_BAD_ARG,
    E_IO,
    E_NON_ASCII,
    E_UNTERM_QUOTE,
    EngineError,
)
from .utils import INTEGER, parse_real, strip_comment


@dataclass(frozen=True)
class Token:
    """One token: its text and the 0-based column where the text starts.

    For a quoted token the recorded column is the first character inside the
    quotes, so ``line[start : start + len(text)] == text`` holds for every
    token.
    """

    text: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class TokenStream:
    """The tokens of one logical line plus enough context to report errors."""

    tokens: list[Token]
    source_line: str
    line_number: int
    raw_line: str | None = field(default=None)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i: int) -> Token:
        return self.tokens[i]

    def text(self, i: int) -> str:
        return self.tokens[i].text

    def texts(self, start: int = 0) -> list[str]:
        return [t.text for t in self.tokens[start:]]

    def error(self, message: str, code: str = E_BAD_ARG, index: int | None = None) -> EngineError:
        """Build an EngineError pointing at token ``index`` (or the command)."""
        span = None
        if index is not None and 0 <= index < len(self.tokens):
            span = self.tokens[index].span
        elif self.tokens:
            span = self.tokens[0].span
        return EngineError(
            message,
            code,
            source_line=self.source_line,
            raw_line=self.raw_line,
            line_number=self.line_number,
            caret_span=span,
        )

    def real(self, i: int) -> float:
        """Parse token i as a real number, pointing the caret at it on failure."""
        try:
            return parse_real(self.tokens[i].text).value
        except EngineError as err:
            raise self.error(err.message, err.error_code, index=i) from None

    def integer(self, i: int) -> int:
        """Parse token i as an integer, pointing the caret at it on failure."""
        try:
            parsed = parse_real(self.tokens[i].text)
        except EngineError as err:
            raise self.error(err.message, err.error_code, index=i) from None
        if parsed.kind != INTEGER:
            raise self.error(
                f"expected an integer, got '{self.tokens[i].text}'", E_BAD_ARG, index=i
            )
        return int(parsed.value)


def tokenize(line: str, line_number: int = 0, raw_line: str | None = None) -> TokenStream:
    """Split one logical line into tokens.

    Comments are stripped, whitespace separates tokens, and a double quote
    at the start of a token begins a quoted group that may contain spaces
    and ``#``.  The closing quote must appear on the same line.

    Raises:
        EngineError: E-NON-ASCII for non-ASCII characters outside comments,
            E-UNTERM-QUOTE when a quoted group never closes.
    """

    def ctx(message: str, code: str, span: tuple[int, int]) -> EngineError:
        return EngineError(
            message,
            code,
            source_line=line,
            raw_line=raw_line,
            line_number=line_number,
            caret_span=span,
        )

    tokens: list[Token] = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        if ord(ch) > 127:
            raise ctx(
                f"non-ASCII character {ch!r} in command input", E_NON_ASCII, (i, i + 1)
            )
        if ch == '"':
            close = line.find('"', i + 1)
            if close < 0:
                raise ctx("unterminated quote", E_UNTERM_QUOTE, (i, n))
            body = line[i + 1 : close]
            for k, c in enumerate(body):
                if ord(c) > 127:
                    raise ctx(
                        f"non-ASCII character {c!r} in command input",
                        E_NON_ASCII,
                        (i + 1 + k, i + 2 + k),
                    )
            tokens.append(Token(body, i + 1))
            i = close + 1
            continue
        start = i
        while i < n and line[i] not in ' \t#"':
            if ord(line[i]) > 127:
                raise ctx(
                    f"non-ASCII character {line[i]!r} in command input",
                    E_NON_ASCII,
                    (i, i + 1),
                )
            i += 1
        tokens.append(Token(line[start:i], start))
    return TokenStream(tokens, line, line_number, raw_line)


def logical_lines(text: str) -> Iterator[tuple[str, int]]:
    """Yield (logical_line, first_physical_line_number) from input text.

    A trailing ``&`` (ignoring whitespace after it) joins the next physical
    line; the ``&`` itself is dropped.  Blank and comment-only lines are
    skipped.  Line numbers are 1-based and refer to the first physical line
    of each logical line.
    """
    pending: str | None = None
    pending_no = 0
    for no, raw in enumerate(text.splitlines(), start=1):
        if pending is None:
            current, current_no = raw, no
        else:
            current, current_no = pending + raw, pending_no
        stripped = current.rstrip()
        if stripped.endswith("&"):
            pending = stripped[:-1]
            pending_no = current_no
            continue
        pending = None
        if strip_comment(current).strip():
            yield current, current_no
    if pending is not None and strip_comment(pending).strip():
        yield pending, pending_no


def read_logical_lines(path: str) -> list[tuple[str, int]]:
    """Read an input file and return its logical lines with line numbers.

    Raises:
        EngineError: E-IO when the file cannot be read.
    """
    try:
        with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
            text = fh.read()
    except OSError as exc:
        raise EngineError(f"cannot read '{path}': {exc.strerror}", E_IO) from None
    return list(logical_lines(text))
