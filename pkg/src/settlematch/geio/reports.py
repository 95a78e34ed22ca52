"""Deterministic output writers: JSON/CSV reports and raster caches.

All real numbers are rendered at 6 significant digits, JSON keys are
sorted, and CSV column order is fixed, so identical inputs always yield
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..grid import BinaryRaster, GridSpec


def format_real(x: float) -> str:
    """Fixed 6-significant-digit rendering used by every text output."""
    if x is None:
        return ""
    if isinstance(x, float) and np.isnan(x):
        return ""
    return f"{x:.6g}"


def _round6(obj):
    """Recursively round floats to 6 significant digits for JSON."""
    if isinstance(obj, float):
        if np.isnan(obj):
            return None
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round6(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _round6(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(obj, path) -> None:
    text = json.dumps(_round6(obj), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """RFC 4180 CSV (CRLF, UTF-8, mandatory header)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_real(v) if isinstance(v, float) else
                             ("" if v is None else v) for v in row])


def write_report(report, path, fmt: str = "json") -> None:
    """Serialize any report object exposing as_dict()/csv_header()/csv_rows()."""
    if fmt == "json":
        write_json(report.as_dict(), path)
    elif fmt == "csv":
        write_csv(path, report.csv_header(), report.csv_rows())
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


# -- binary raster cache --------------------------------------------------------

_MAGIC = b"SMBR1\n"


def write_binary_raster(raster: BinaryRaster, path) -> None:
    """Write the packed-bit cache format (magic, JSON header line, raw bits)."""
    spec = raster.spec
    header = json.dumps({
        "resolution": spec.resolution, "col0": spec.col0, "row0": spec.row0,
        "width": spec.width, "height": spec.height,
    }, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(raster.bits.tobytes())


def read_binary_raster(path) -> BinaryRaster:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise FormatError(f"{Path(path).name} is not a raster cache file")
        header = json.loads(fh.readline().decode("utf-8"))
        spec = GridSpec.from_lattice(header["col0"], header["row0"], header["resolution"],
                                     header["width"], header["height"])
        n_bytes = (spec.n_cells + 7) // 8
        bits = np.frombuffer(fh.read(n_bytes), dtype=np.uint8)
        if bits.size != n_bytes:
            raise FormatError(f"{Path(path).name} truncated")
    bits = bits.copy()
    bits.setflags(write=False)
    return BinaryRaster(spec, bits)
