"""Line-oriented text formats shared by dataset, preset, log and report files.

All files start with a `# <kind> schema=1 ...` header line so they stay
diff-able and versioned. Floats are written with repr (shortest round-trip
form), which makes regenerated files byte-identical for identical runs and
lets datasets reload bitwise-equal.
"""

from __future__ import annotations


class ParseError(ValueError):
    """Malformed structured-text input; carries the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def fmt_float(value: float) -> str:
    """Shortest decimal text that round-trips the float64 exactly."""
    return repr(float(value))


def fmt_floats(values) -> str:
    return " ".join(fmt_float(v) for v in values)


def header_line(kind: str, **fields) -> str:
    parts = [f"# {kind} schema=1"]
    parts += [f"{key}={value}" for key, value in fields.items()]
    return " ".join(parts)


def parse_header(line: str, kind: str, lineno: int = 1) -> dict[str, str]:
    """Parse `# <kind> schema=1 key=value ...` into a dict of the keys."""
    tokens = line.strip().split()
    if len(tokens) < 2 or tokens[0] != "#" or tokens[1] != kind:
        raise ParseError(f"expected '# {kind} schema=...' header, got {line.strip()!r}", lineno)
    fields: dict[str, str] = {}
    for token in tokens[2:]:
        if "=" not in token:
            raise ParseError(f"malformed header field {token!r}", lineno)
        key, value = token.split("=", 1)
        fields[key] = value
    if fields.get("schema") != "1":
        raise ParseError(f"unsupported schema {fields.get('schema')!r}", lineno)
    return fields
