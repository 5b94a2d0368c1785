"""File formats: binary PGM frames, tagged float32 depth maps, ASCII PLY clouds."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core import DepthMap, GrayImage, PointCloud, SensorError

DEPTH_MAGIC = b"DTDEPTH1"


class FormatError(SensorError):
    """Malformed file content; the message carries the byte offset."""


def write_pgm(path, img: GrayImage) -> None:
    """Binary PGM (P5), maxval 255."""
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(img.pixels.tobytes())


def read_pgm(path) -> GrayImage:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: bad PGM magic at byte 0")
    # Header: magic, width, height, maxval separated by whitespace/comments.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        m = re.match(rb"\d+", data[pos:])
        if not m:
            raise FormatError(f"{path}: malformed PGM header at byte {pos}")
        fields.append(int(m.group(0)))
        pos += m.end()
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} at byte {pos}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise FormatError(
            f"{path}: truncated raster at byte {pos + len(raster)}, "
            f"expected {expected} bytes")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def write_depth(path, depth: DepthMap) -> None:
    """Magic, 'width height' as text, then row-major little-endian float32 mm."""
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC)
        f.write(f"\n{depth.width} {depth.height}\n".encode("ascii"))
        f.write(depth.data.astype("<f4").tobytes())


def read_depth(path) -> DepthMap:
    data = Path(path).read_bytes()
    if not data.startswith(DEPTH_MAGIC):
        raise FormatError(f"{path}: bad depth magic at byte 0")
    m = re.match(rb"\n(\d+) (\d+)\n", data[len(DEPTH_MAGIC):])
    if not m:
        raise FormatError(f"{path}: malformed depth header at byte {len(DEPTH_MAGIC)}")
    width, height = int(m.group(1)), int(m.group(2))
    pos = len(DEPTH_MAGIC) + m.end()
    expected = width * height * 4
    raw = data[pos:pos + expected]
    if len(raw) != expected:
        raise FormatError(
            f"{path}: truncated depth data at byte {pos + len(raw)}, "
            f"expected {expected} bytes")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(height, width)
    return DepthMap(values)


def write_ply(path, cloud: PointCloud) -> None:
    """ASCII PLY with float x, y, z vertex properties."""
    with open(path, "w", encoding="ascii") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(cloud)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("end_header\n")
        np.savetxt(f, cloud.points.astype(np.float32), fmt="%.9g")


def read_ply(path) -> PointCloud:
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or lines[0] != "ply":
        raise FormatError(f"{path}: bad PLY magic at byte 0")
    count = None
    body_at = None
    offset = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex "):
            count = int(line.split()[-1])
        if line == "end_header":
            body_at = i + 1
            offset += len(line) + 1
            break
        offset += len(line) + 1
    if count is None or body_at is None:
        raise FormatError(f"{path}: missing PLY header fields before byte {offset}")
    rows = lines[body_at:body_at + count]
    if len(rows) != count:
        raise FormatError(
            f"{path}: truncated PLY body at byte {len(text)}, "
            f"expected {count} vertices, found {len(rows)}")
    if count == 0:
        return PointCloud(np.zeros((0, 3)))
    pts = np.array([[float(x) for x in row.split()] for row in rows])
    if pts.shape[1] != 3:
        raise FormatError(f"{path}: PLY rows must have 3 coordinates")
    return PointCloud(pts)
