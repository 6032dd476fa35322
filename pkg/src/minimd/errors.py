"""Engine errors: stable codes, documentation URLs and caret rendering.

Every failure the engine can produce is an :class:`EngineError` carrying a
stable ``error_code``.  Codes are part of the public contract: scripts, death
tests and the scripting binding match on them, so once published they never
change meaning.  The human-facing rendering points at the line of input that
caused the problem and underlines the offending token.
"""

from __future__ import annotations

import os

# Base URL for per-code documentation pages.  The default points at a
# reserved (non-resolving) host; deployments override it with the env var.
DOC_URL_ENV = "MINIMD_DOC_URL_BASE"
_DEFAULT_DOC_URL_BASE = "https://minimd.invalid/"

# Stable error codes.
E_UNKNOWN_CMD = "E-UNKNOWN-CMD"
E_BAD_ARG = "E-BAD-ARG"
E_NOT_A_NUMBER = "E-NOT-A-NUMBER"
E_UNTERM_QUOTE = "E-UNTERM-QUOTE"
E_NON_ASCII = "E-NON-ASCII"
E_UNDEFINED_VAR = "E-UNDEFINED-VAR"
E_IO = "E-IO"
E_PARSE = "E-PARSE"
E_UNKNOWN_STYLE = "E-UNKNOWN-STYLE"
E_DUPLICATE_STYLE = "E-DUPLICATE-STYLE"
E_NO_STYLE = "E-NO-STYLE"
E_NO_COEFF = "E-NO-COEFF"
E_NO_BOX = "E-NO-BOX"
E_NO_FIX = "E-NO-FIX"
E_BOX_TOO_SMALL = "E-BOX-TOO-SMALL"
E_CORRUPT_RESTART = "E-CORRUPT-RESTART"
E_UNSUPPORTED = "E-UNSUPPORTED"
E_BAD_RANGE = "E-BAD-RANGE"
E_UNKNOWN_KEY = "E-UNKNOWN-KEY"
E_UNKNOWN_ARRAY = "E-UNKNOWN-ARRAY"
E_BAD_HANDLE = "E-BAD-HANDLE"
E_INTERNAL = "E-INTERNAL"

ALL_CODES = tuple(
    value for name, value in sorted(globals().items()) if name.startswith("E_")
)


def doc_url(error_code: str) -> str:
    """Return the documentation URL for an error code.

    The URL is the configured base (``MINIMD_DOC_URL_BASE``, falling back to
    a build-time default) with ``errors/<code>`` appended.
    """
    base = os.environ.get(DOC_URL_ENV, _DEFAULT_DOC_URL_BASE)
    if not base.endswith("/"):
        base += "/"
    return f"{base}errors/{error_code}"


class EngineError(Exception):
    """A failure with a stable code and optional input-line context.

    Attributes:
        message: one-line human description of the failure.
        error_code: stable identifier, e.g. ``E-UNKNOWN-CMD``.
        source_line: the input line the error refers to, if any.  When the
            line went through variable substitution this is the expanded
            text, and ``raw_line`` holds the original.
        raw_line: pre-substitution text when it differs from ``source_line``.
        line_number: 1-based line number within the input source.
        caret_span: ``(start, end)`` half-open column range (0-based) of the
            offending token within ``source_line``.
        arg_index: set by argument parsers that do not know token positions;
            the command dispatcher converts it into a ``caret_span``.
    """

    def __init__(
        self,
        message: str,
        error_code: str,
        *,
        source_line: str | None = None,
        raw_line: str | None = None,
        line_number: int | None = None,
        caret_span: tuple[int, int] | None = None,
        arg_index: int | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.source_line = source_line
        self.raw_line = raw_line
        self.line_number = line_number
        self.caret_span = caret_span
        self.arg_index = arg_index

    @property
    def doc_url(self) -> str:
        return doc_url(self.error_code)

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return f"{self.message} [{self.error_code}]"


def render_error(err: EngineError) -> str:
    """Render an error as a multi-line report.

    Layout: the message, the offending input line prefixed with its line
    number, a marker line with one ``^`` per caret column, and a ``see:``
    pointer to the error documentation.  When the input line was produced by
    variable substitution the raw line is shown above the expanded one so
    both spellings are visible.  Errors without line context render as just
    the message and the pointer.
    """
    lines = [f"ERROR: {err.message}"]
    if err.source_line is not None and err.line_number is not None:
        prefix = f"line {err.line_number}: "
        if err.raw_line is not None and err.raw_line != err.source_line:
            lines.append(prefix + err.raw_line)
        lines.append(prefix + err.source_line)
        if err.caret_span is not None:
            start, end = err.caret_span
            start = max(0, min(start, len(err.source_line)))
            end = max(start + 1, min(end, len(err.source_line) + 1))
            lines.append(" " * (len(prefix) + start) + "^" * (end - start))
    lines.append(f"see: {err.doc_url}")
    return "\n".join(lines)
