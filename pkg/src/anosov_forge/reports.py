"""Plain-text report and CSV emission with deterministic formatting."""

import csv
import math


def format_value(v):
    if getattr(v, "shape", None) == ():  # numpy scalar
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


def structured_text(mapping):
    """One ``name = value`` line per key, in insertion order."""
    return "".join(f"{k} = {format_value(v)}\n" for k, v in mapping.items())


def write_report(path, mapping):
    with open(path, "w") as fh:
        fh.write(structured_text(mapping))


def parse_key_values(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_report(path):
    with open(path) as fh:
        return parse_key_values(fh.read())


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(x) for x in r])
