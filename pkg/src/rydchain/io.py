"""CSV and image output helpers.

Every data file starts with a single comment line carrying a JSON header
(resolved parameters, seed, tool version) so any output can be reproduced
from its own header.
"""

from __future__ import annotations

import json

HEADER_PREFIX = "# "


def format_float(x) -> str:
    """Shortest round-trippable decimal form, for byte-stable CSV output."""
    return repr(float(x))


def write_csv(path, header: dict, columns, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(HEADER_PREFIX + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(c) for c in row) + "\n")


def _cell(c) -> str:
    if isinstance(c, bool):
        return str(int(c))
    if isinstance(c, float):
        return format_float(c)
    return str(c)


def read_header(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith(HEADER_PREFIX):
        raise ValueError(f"{path} has no JSON header line")
    return json.loads(first[len(HEADER_PREFIX):])


def write_ppm(path, rgb) -> None:
    """Binary P6 image from an (H, W, 3) uint8 array."""
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.astype("uint8").tobytes())
