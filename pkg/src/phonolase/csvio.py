"""Deterministic CSV and metadata output.

Floats are written in lowercase scientific notation with 17 significant
digits so binary values round-trip losslessly and repeated runs are
byte-identical regardless of parallelism.
"""

import json


def fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".16e")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_metadata(path, payload):
    """Sidecar JSON next to a primary CSV; fully determines the run."""
    with open(str(path) + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
