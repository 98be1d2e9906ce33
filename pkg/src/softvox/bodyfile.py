"""Plain-text voxel body files.

One character per cell: `.` empty, `P` passive, `A` active.  Layers are
listed bottom-up, each as grid_y rows of grid_x characters; rows within a
layer run along y, characters along x:

    softvox-body 1
    dims 3 2 2
    layer 0
    PPP
    .A.
    layer 1
    .P.
    ...

Phases are not part of the file; bodies read from disk carry zero phase
everywhere (descriptors ignore phase, replays of bare bodies oscillate
in unison).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .phenotype import Material, VoxelBody

FORMAT_VERSION = 1
_HEADER = "softvox-body"

_CHAR_TO_MATERIAL = {".": Material.EMPTY, "P": Material.PASSIVE, "A": Material.ACTIVE}
_MATERIAL_TO_CHAR = {v: k for k, v in _CHAR_TO_MATERIAL.items()}


class BodyParseError(Exception):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def serialize_body(body: VoxelBody) -> str:
    x, y, z = body.dims
    lines = [f"{_HEADER} {FORMAT_VERSION}", f"dims {x} {y} {z}"]
    for k in range(z):
        lines.append(f"layer {k}")
        for j in range(y):
            lines.append(
                "".join(_MATERIAL_TO_CHAR[Material(body.material[i, j, k])] for i in range(x))
            )
    return "\n".join(lines) + "\n"


def parse_body(text: str) -> VoxelBody:
    lines = text.splitlines()
    if not lines:
        raise BodyParseError(1, "empty body document")
    header = lines[0].split()
    if len(header) != 2 or header[0] != _HEADER or header[1] != str(FORMAT_VERSION):
        raise BodyParseError(1, f"expected '{_HEADER} {FORMAT_VERSION}'")
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise BodyParseError(2, "expected 'dims X Y Z'")
    try:
        x, y, z = (int(t) for t in lines[1].split()[1:])
    except ValueError as exc:
        raise BodyParseError(2, "expected 'dims X Y Z'") from exc
    if min(x, y, z) < 1:
        raise BodyParseError(2, "dims must be >= 1")

    material = np.zeros((x, y, z), dtype=np.int8)
    lineno = 2
    for k in range(z):
        lineno += 1
        if lineno > len(lines) or lines[lineno - 1].strip() != f"layer {k}":
            raise BodyParseError(lineno, f"expected 'layer {k}'")
        for j in range(y):
            lineno += 1
            if lineno > len(lines):
                raise BodyParseError(lineno, "unexpected end of document")
            row = lines[lineno - 1].strip()
            if len(row) != x:
                raise BodyParseError(lineno, f"expected {x} cells, got {len(row)}")
            for i, ch in enumerate(row):
                if ch not in _CHAR_TO_MATERIAL:
                    raise BodyParseError(lineno, f"unknown material {ch!r}")
                material[i, j, k] = _CHAR_TO_MATERIAL[ch]
    return VoxelBody(material=material, phase=np.zeros((x, y, z)))


def write_body(body: VoxelBody, path: str | Path) -> None:
    Path(path).write_text(serialize_body(body))


def read_body(path: str | Path) -> VoxelBody:
    return parse_body(Path(path).read_text())
