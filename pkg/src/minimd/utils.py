"""Small string and number helpers shared by every other module.

All parsing here is locale-independent and byte-oriented: command input is
ASCII by contract, numbers use the C locale decimal point, and the random
generator is fully specified so other implementations can reproduce it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import E_NOT_A_NUMBER, EngineError

INTEGER = "integer"
REAL = "real"

# Strict numeric grammar: optional sign, digits with optional decimal point,
# optional exponent.  Deliberately narrower than float(): no inf/nan, no
# underscores, no hex.
_INT_RE = re.compile(r"[+-]?\d+\Z")
_REAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_NUM_CHARS = set("+-.eE0123456789")

_LOWER_TABLE = str.maketrans(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ", "abcdefghijklmnopqrstuvwxyz"
)
_UPPER_TABLE = str.maketrans(
    "abcdefghijklmnopqrstuvwxyz", "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
)


@dataclass(frozen=True)
class ParsedNumber:
    """A parsed numeric token: the value plus an integer/real kind tag."""

    value: float
    kind: str

    @property
    def is_integer(self) -> bool:
        return self.kind == INTEGER


def trim_and_compress(s: str) -> str:
    """Strip leading/trailing whitespace and collapse internal runs to one space."""
    return " ".join(s.split())


def strip_comment(s: str) -> str:
    """Remove everything from the first unquoted ``#`` onward.

    Quoting means double quotes; a ``#`` inside a quoted group is literal
    text.  The text before the comment is returned unmodified, trailing
    whitespace included.
    """
    in_quote = False
    for i, ch in enumerate(s):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return s[:i]
    return s


def parse_real(token: str) -> ParsedNumber:
    """Parse a numeric token against the strict grammar.

    Returns a :class:`ParsedNumber` whose ``kind`` says whether the token was
    written as an integer or as a real (decimal point or exponent present).
    Raises ``EngineError`` with code E-NOT-A-NUMBER on any malformed input;
    the message names the first offending position so the caret reporter can
    point at it.
    """
    if _INT_RE.match(token):
        return ParsedNumber(float(token), INTEGER)
    if _REAL_RE.match(token):
        return ParsedNumber(float(token), REAL)
    position = 0
    for i, ch in enumerate(token):
        if ch not in _NUM_CHARS:
            position = i
            break
    raise EngineError(
        f"expected a number, got '{token}' (bad character at position {position})",
        E_NOT_A_NUMBER,
    )


def case_fold(s: str, direction: str = "lower") -> str:
    """ASCII-only case fold; characters outside A-Z/a-z pass through."""
    if direction == "lower":
        return s.translate(_LOWER_TABLE)
    if direction == "upper":
        return s.translate(_UPPER_TABLE)
    raise ValueError(f"direction must be 'lower' or 'upper', got {direction!r}")


def join_words(parts) -> str:
    """Join pre-tokenized words back into a command line (single spaces)."""
    return " ".join(parts)


def fmt_g17(x: float) -> str:
    """Format a real with 17 significant digits (value-exact round trip)."""
    return format(float(x), ".17g")


def fmt_g15(x: float) -> str:
    """Format a real with 15 significant digits (thermo output)."""
    return format(float(x), ".15g")


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 sequence generator.

    The exact published constants are used so that any implementation, in
    any language, reproduces the same stream from the same seed:

        state += 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    with all arithmetic modulo 2**64.  ``uniform()`` maps the top 53 bits to
    a double in [0, 1).
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def sample_indices(self, n: int, k: int) -> list[int]:
        """Choose k distinct indices out of range(n), returned in ascending order.

        Partial Fisher-Yates: for draw i, swap slot i with slot
        i + next_u64() % (n - i).  The modulo bias is negligible for the
        corpus sizes involved and keeps the algorithm trivial to port.
        Asking for k >= n returns all of range(n).
        """
        if k < 0 or n < 0:
            raise ValueError(f"cannot sample {k} of {n}")
        slots = list(range(n))
        if k >= n:
            return slots
        for i in range(k):
            j = i + self.next_u64() % (n - i)
            slots[i], slots[j] = slots[j], slots[i]
        return sorted(slots[:k])
