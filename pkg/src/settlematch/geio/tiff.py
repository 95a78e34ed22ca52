"""Minimal single-band GeoTIFF reader and writer.

Covers exactly the subset the settlement products use: one band,
uint8/int16/float32 samples, strip or tile layout, deflate or no
compression, georeferencing via model-pixel-scale plus one tiepoint,
and inline geokeys. Unknown non-critical tags are ignored; anything
outside the subset raises FormatError naming the offending tag.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import AlignmentError, FormatError
from ..grid import NODATA_CODE, CategoricalRaster, GridSpec, NumericRaster

TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_PLANAR_CONFIG = 284
TAG_TILE_WIDTH = 322
TAG_TILE_LENGTH = 323
TAG_TILE_OFFSETS = 324
TAG_TILE_BYTE_COUNTS = 325
TAG_SAMPLE_FORMAT = 339
TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GDAL_NODATA = 42113

KEY_MODEL_TYPE = 1024
KEY_RASTER_TYPE = 1025
KEY_GEOGRAPHIC_TYPE = 2048
KEY_PROJECTED_CS_TYPE = 3072

MODEL_TYPE_PROJECTED = 1
MODEL_TYPE_GEOGRAPHIC = 2
EPSG_WGS84 = 4326
ESRI_WORLD_MOLLWEIDE = 54009

COMPRESSION_NONE = 1
COMPRESSION_DEFLATE = 8
COMPRESSION_DEFLATE_OLD = 32946

# (bits, sample_format) -> numpy dtype for the supported band types
_DTYPES = {(8, 1): np.uint8, (16, 2): np.int16, (32, 3): np.float32}

# TIFF field type -> (struct code, byte size)
_FIELD_TYPES = {1: ("B", 1), 2: ("s", 1), 3: ("H", 2), 4: ("I", 4),
                11: ("f", 4), 12: ("d", 8)}


@dataclass
class TiffImage:
    """Decoded single-band image plus its georeferencing tags."""

    array: np.ndarray
    pixel_scale: tuple[float, float]
    tiepoint: tuple[float, float, float, float]  # raster i, j and model x, y
    geokeys: dict[int, int]
    nodata: float | None = None

    @property
    def model_origin(self) -> tuple[float, float]:
        """Model coordinates of the outer corner of pixel (0, 0)."""
        i, j, x, y = self.tiepoint
        sx, sy = self.pixel_scale
        return x - i * sx, y + j * sy


# -- low-level reader ---------------------------------------------------------


def _read_entries(buf: bytes, order: str):
    (ifd_offset,) = struct.unpack_from(order + "I", buf, 4)
    (n,) = struct.unpack_from(order + "H", buf, ifd_offset)
    entries = {}
    for k in range(n):
        tag, ftype, count, raw = struct.unpack_from(order + "HHI4s", buf, ifd_offset + 2 + 12 * k)
        entries[tag] = (ftype, count, raw)
    (next_ifd,) = struct.unpack_from(order + "I", buf, ifd_offset + 2 + 12 * n)
    if next_ifd != 0:
        raise FormatError("multi-image TIFF not supported (next-IFD offset is nonzero)")
    return entries


def _tag_values(buf: bytes, order: str, entry):
    ftype, count, raw = entry
    if ftype not in _FIELD_TYPES:
        raise FormatError(f"unsupported TIFF field type {ftype}")
    code, size = _FIELD_TYPES[ftype]
    nbytes = size * count
    if nbytes <= 4:
        data = raw[:nbytes]
    else:
        (offset,) = struct.unpack(order + "I", raw)
        data = buf[offset:offset + nbytes]
    if ftype == 2:
        return data.rstrip(b"\x00").decode("ascii", errors="replace")
    return list(struct.unpack(order + code * count, data))


def _decompress(chunk: bytes, compression: int) -> bytes:
    if compression == COMPRESSION_NONE:
        return chunk
    return zlib.decompress(chunk)


def read_tiff(path) -> TiffImage:
    """Parse a file in the supported GeoTIFF subset into a TiffImage."""
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise FormatError("file too short to be a TIFF")
    if buf[:2] == b"II":
        order = "<"
    elif buf[:2] == b"MM":
        order = ">"
    else:
        raise FormatError("bad TIFF byte-order mark")
    (magic,) = struct.unpack_from(order + "H", buf, 2)
    if magic != 42:
        raise FormatError(f"bad TIFF magic number {magic}")

    entries = _read_entries(buf, order)

    def get(tag, default=None):
        if tag not in entries:
            return default
        return _tag_values(buf, order, entries[tag])

    spp = get(TAG_SAMPLES_PER_PIXEL, [1])[0]
    if spp != 1:
        raise FormatError(f"samples-per-pixel is {spp}, only single-band files are supported")
    planar = get(TAG_PLANAR_CONFIG, [1])[0]
    if planar != 1:
        raise FormatError(f"planar-configuration {planar} not supported")
    compression = get(TAG_COMPRESSION, [1])[0]
    if compression == COMPRESSION_DEFLATE_OLD:
        compression = COMPRESSION_DEFLATE
    if compression not in (COMPRESSION_NONE, COMPRESSION_DEFLATE):
        raise FormatError(f"compression {compression} not supported (none or deflate only)")

    width = get(TAG_IMAGE_WIDTH)
    height = get(TAG_IMAGE_LENGTH)
    if width is None or height is None:
        raise FormatError("image-width or image-length tag missing")
    width, height = width[0], height[0]
    bits = get(TAG_BITS_PER_SAMPLE, [8])[0]
    sample_format = get(TAG_SAMPLE_FORMAT, [1])[0]
    dtype = _DTYPES.get((bits, sample_format))
    if dtype is None:
        raise FormatError(f"bits-per-sample {bits} with sample-format {sample_format} "
                          "not supported (uint8, int16 or float32 only)")
    itemsize = np.dtype(dtype).itemsize

    if TAG_TILE_OFFSETS in entries:
        tw = get(TAG_TILE_WIDTH)[0]
        th = get(TAG_TILE_LENGTH)[0]
        offsets = get(TAG_TILE_OFFSETS)
        counts = get(TAG_TILE_BYTE_COUNTS)
        tiles_across = (width + tw - 1) // tw
        tiles_down = (height + th - 1) // th
        if len(offsets) != tiles_across * tiles_down:
            raise FormatError("tile-offsets count does not match the tile grid")
        arr = np.zeros((tiles_down * th, tiles_across * tw), dtype=dtype)
        for t, (off, cnt) in enumerate(zip(offsets, counts)):
            raw = _decompress(buf[off:off + cnt], compression)
            tile = np.frombuffer(raw, dtype=dtype, count=tw * th).reshape(th, tw)
            r0 = (t // tiles_across) * th
            c0 = (t % tiles_across) * tw
            arr[r0:r0 + th, c0:c0 + tw] = tile
        arr = arr[:height, :width].copy()
    elif TAG_STRIP_OFFSETS in entries:
        offsets = get(TAG_STRIP_OFFSETS)
        counts = get(TAG_STRIP_BYTE_COUNTS)
        if counts is None or len(counts) != len(offsets):
            raise FormatError("strip-byte-counts missing or inconsistent")
        raw = b"".join(_decompress(buf[o:o + c], compression)
                       for o, c in zip(offsets, counts))
        if len(raw) < width * height * itemsize:
            raise FormatError("pixel data shorter than image dimensions require")
        arr = np.frombuffer(raw, dtype=dtype, count=width * height).reshape(height, width).copy()
    else:
        raise FormatError("neither strip-offsets nor tile-offsets present")

    if order == ">":
        arr = arr.byteswap().view(arr.dtype.newbyteorder("="))

    scale = get(TAG_MODEL_PIXEL_SCALE)
    if scale is None:
        raise FormatError("model-pixel-scale tag missing")
    tie = get(TAG_MODEL_TIEPOINT)
    if tie is None or len(tie) < 6:
        raise FormatError("model-tiepoint tag missing")

    geokeys: dict[int, int] = {}
    directory = get(TAG_GEO_KEY_DIRECTORY)
    if directory is not None:
        nkeys = directory[3]
        for k in range(nkeys):
            key_id, location, count, value = directory[4 + 4 * k: 8 + 4 * k]
            if location == 0 and count == 1:
                geokeys[key_id] = value

    nodata = None
    nodata_text = get(TAG_GDAL_NODATA)
    if nodata_text is not None:
        try:
            nodata = float(nodata_text.strip())
        except ValueError:
            pass

    return TiffImage(array=arr, pixel_scale=(scale[0], scale[1]),
                     tiepoint=(tie[0], tie[1], tie[3], tie[4]),
                     geokeys=geokeys, nodata=nodata)


# -- low-level writer ---------------------------------------------------------


def _pack_entry(order, tag, ftype, values, overflow, overflow_base):
    if ftype == 2:
        data = values if isinstance(values, bytes) else values.encode("ascii")
        if not data.endswith(b"\x00"):
            data += b"\x00"
        count = len(data)
    else:
        code, size = _FIELD_TYPES[ftype]
        count = len(values)
        data = struct.pack(order + code * count, *values)
    if len(data) <= 4:
        raw = data.ljust(4, b"\x00")
    else:
        raw = struct.pack(order + "I", overflow_base + len(overflow))
        overflow += data
        if len(overflow) % 2:
            overflow += b"\x00"
    return struct.pack(order + "HHI", tag, ftype, count) + raw, overflow


def write_tiff(path, array: np.ndarray, pixel_scale: tuple[float, float],
               model_origin: tuple[float, float], geokeys: dict[int, int],
               compression: str = "none", tile_size: int | None = None,
               nodata: float | None = None) -> None:
    """Write a single-band little-endian (Geo)TIFF.

    ``model_origin`` is the model coordinate of the outer corner of pixel
    (0, 0); it is stored as the canonical (0,0,0) tiepoint. ``tile_size``
    switches from strips to square tiles.
    """
    if array.ndim != 2:
        raise ValueError("array must be two-dimensional")
    dtype = np.dtype(array.dtype)
    fmt_map = {np.dtype(np.uint8): (8, 1), np.dtype(np.int16): (16, 2),
               np.dtype(np.float32): (32, 3)}
    if dtype not in fmt_map:
        raise FormatError(f"dtype {dtype} not supported (uint8, int16 or float32 only)")
    bits, sfmt = fmt_map[dtype]
    if compression not in ("none", "deflate"):
        raise ValueError(f"compression must be 'none' or 'deflate', got {compression!r}")
    comp_code = COMPRESSION_NONE if compression == "none" else COMPRESSION_DEFLATE

    order = "<"
    height, width = array.shape
    arr = np.ascontiguousarray(array, dtype=dtype)
    if arr.dtype.byteorder == ">":
        arr = arr.byteswap()

    def encode(chunk: bytes) -> bytes:
        return chunk if comp_code == COMPRESSION_NONE else zlib.compress(chunk, 6)

    blocks: list[bytes] = []
    if tile_size:
        tw = th = int(tile_size)
        tiles_across = (width + tw - 1) // tw
        tiles_down = (height + th - 1) // th
        padded = np.zeros((tiles_down * th, tiles_across * tw), dtype=dtype)
        padded[:height, :width] = arr
        for tr in range(tiles_down):
            for tc in range(tiles_across):
                tile = padded[tr * th:(tr + 1) * th, tc * tw:(tc + 1) * tw]
                blocks.append(encode(tile.tobytes()))
    else:
        row_bytes = width * dtype.itemsize
        rows_per_strip = max(1, 65536 // row_bytes)
        for r0 in range(0, height, rows_per_strip):
            blocks.append(encode(arr[r0:r0 + rows_per_strip].tobytes()))

    data = b""
    offsets = []
    counts = []
    base = 8
    for b in blocks:
        offsets.append(base + len(data))
        counts.append(len(b))
        data += b
        if len(data) % 2:
            data += b"\x00"

    key_ids = sorted(geokeys)
    directory = [1, 1, 0, len(key_ids)]
    for kid in key_ids:
        directory += [kid, 0, 1, geokeys[kid]]

    ox, oy = model_origin
    tags: list[tuple[int, int, object]] = [
        (TAG_IMAGE_WIDTH, 4, [width]),
        (TAG_IMAGE_LENGTH, 4, [height]),
        (TAG_BITS_PER_SAMPLE, 3, [bits]),
        (TAG_COMPRESSION, 3, [comp_code]),
        (TAG_PHOTOMETRIC, 3, [1]),
        (TAG_SAMPLES_PER_PIXEL, 3, [1]),
        (TAG_SAMPLE_FORMAT, 3, [sfmt]),
        (TAG_MODEL_PIXEL_SCALE, 12, [pixel_scale[0], pixel_scale[1], 0.0]),
        (TAG_MODEL_TIEPOINT, 12, [0.0, 0.0, 0.0, ox, oy, 0.0]),
        (TAG_GEO_KEY_DIRECTORY, 3, directory),
    ]
    if tile_size:
        tags += [(TAG_TILE_WIDTH, 4, [tw]), (TAG_TILE_LENGTH, 4, [th]),
                 (TAG_TILE_OFFSETS, 4, offsets), (TAG_TILE_BYTE_COUNTS, 4, counts)]
    else:
        tags += [(TAG_STRIP_OFFSETS, 4, offsets), (TAG_ROWS_PER_STRIP, 4, [rows_per_strip]),
                 (TAG_STRIP_BYTE_COUNTS, 4, counts)]
    if nodata is not None:
        text = "nan" if isinstance(nodata, float) and np.isnan(nodata) else repr(nodata)
        tags.append((TAG_GDAL_NODATA, 2, text))
    tags.sort(key=lambda t: t[0])

    ifd_offset = 8 + len(data)
    overflow_base = ifd_offset + 2 + 12 * len(tags) + 4
    overflow = b""
    entry_bytes = b""
    for tag, ftype, values in tags:
        entry, overflow = _pack_entry(order, tag, ftype, values, overflow, overflow_base)
        entry_bytes += entry

    with open(path, "wb") as fh:
        fh.write(b"II" + struct.pack(order + "HI", 42, ifd_offset))
        fh.write(data)
        fh.write(struct.pack(order + "H", len(tags)))
        fh.write(entry_bytes)
        fh.write(struct.pack(order + "I", 0))
        fh.write(overflow)


# -- lattice-snapped raster interface ----------------------------------------

SNAP_TOL_DEG = 1e-6


def _snap_resolution(deg_per_pixel: float) -> float:
    """Express the pixel size in arc-seconds, snapped to 1e-6 arc-seconds."""
    return round(deg_per_pixel * 3600.0, 6)


def _snapped_spec(img: TiffImage) -> GridSpec:
    sx, sy = img.pixel_scale
    if abs(sx - sy) > 1e-6 * max(sx, sy):
        raise FormatError(f"model-pixel-scale is anisotropic ({sx} x {sy})")
    res = _snap_resolution(sx)
    res_deg = res / 3600.0
    lon0, lat0 = img.model_origin
    col0 = round((lon0 + 180.0) / res_deg)
    row0 = round((90.0 - lat0) / res_deg)
    if abs(-180.0 + col0 * res_deg - lon0) > SNAP_TOL_DEG or \
       abs(90.0 - row0 * res_deg - lat0) > SNAP_TOL_DEG:
        raise AlignmentError(
            f"grid origin ({lon0}, {lat0}) is more than {SNAP_TOL_DEG} deg off the "
            f"global {res} arc-second lattice")
    h, w = img.array.shape
    return GridSpec.from_lattice(col0, row0, res, w, h)


def read_geotiff(path) -> NumericRaster | CategoricalRaster:
    """Read a lon/lat GeoTIFF as a raster on the global lattice.

    uint8 bands become CategoricalRaster (no-data 255), int16 and float32
    bands become NumericRaster (no-data mapped to NaN). Projected files
    are rejected; Mollweide inputs go through read_mollweide_geotiff.
    """
    img = read_tiff(path)
    model_type = img.geokeys.get(KEY_MODEL_TYPE, MODEL_TYPE_GEOGRAPHIC)
    if model_type != MODEL_TYPE_GEOGRAPHIC:
        raise FormatError(
            f"GTModelTypeGeoKey is {model_type}; only geographic lon/lat rasters are "
            "read directly (use read_mollweide_geotiff for the Mollweide path)")
    spec = _snapped_spec(img)
    arr = img.array
    if arr.dtype == np.uint8:
        codes = arr.copy()
        if img.nodata is not None and int(img.nodata) != NODATA_CODE:
            codes[codes == int(img.nodata)] = NODATA_CODE
        cats = tuple(int(c) for c in np.unique(codes) if c != NODATA_CODE)
        codes.setflags(write=False)
        return CategoricalRaster(spec, codes, cats)
    values = arr.astype(np.float32)
    if img.nodata is not None and not np.isnan(img.nodata):
        values[arr == arr.dtype.type(img.nodata)] = np.nan
    values.setflags(write=False)
    return NumericRaster(spec, values)


def write_geotiff(raster: NumericRaster | CategoricalRaster, path,
                  compression: str = "none", tile_size: int | None = None) -> None:
    """Write a lattice raster as a geographic (EPSG:4326) GeoTIFF."""
    spec = raster.spec
    geokeys = {KEY_MODEL_TYPE: MODEL_TYPE_GEOGRAPHIC, KEY_RASTER_TYPE: 1,
               KEY_GEOGRAPHIC_TYPE: EPSG_WGS84}
    res = spec.res_deg
    if isinstance(raster, CategoricalRaster):
        write_tiff(path, raster.codes.astype(np.uint8), (res, res),
                   (spec.origin_lon, spec.origin_lat), geokeys,
                   compression=compression, tile_size=tile_size, nodata=NODATA_CODE)
    else:
        write_tiff(path, raster.values.astype(np.float32), (res, res),
                   (spec.origin_lon, spec.origin_lat), geokeys,
                   compression=compression, tile_size=tile_size)


# -- Mollweide ingest ---------------------------------------------------------

# Sphere radius of the World_Mollweide frame the 1 km settlement-class
# product ships in (authalic WGS84 radius, meters).
MOLLWEIDE_RADIUS_M = 6371007.181


def mollweide_forward(lon_deg: np.ndarray, lat_deg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project lon/lat degrees to Mollweide x/y meters (central meridian 0)."""
    lam = np.radians(np.asarray(lon_deg, dtype=np.float64))
    phi = np.radians(np.asarray(lat_deg, dtype=np.float64))
    theta = np.arcsin(np.clip(np.sin(phi), -1.0, 1.0))
    target = np.pi * np.sin(phi)
    for _ in range(25):
        f = 2.0 * theta + np.sin(2.0 * theta) - target
        df = 2.0 + 2.0 * np.cos(2.0 * theta)
        step = np.where(df > 1e-12, f / np.maximum(df, 1e-12), 0.0)
        theta = theta - step
        if np.max(np.abs(step)) < 1e-13:
            break
    r = MOLLWEIDE_RADIUS_M
    x = r * (2.0 * np.sqrt(2.0) / np.pi) * lam * np.cos(theta)
    y = r * np.sqrt(2.0) * np.sin(theta)
    return x, y


def read_mollweide_geotiff(path, target: GridSpec) -> CategoricalRaster:
    """Resample a Mollweide uint8 GeoTIFF onto a lon/lat target grid.

    Each target cell takes the code of the Mollweide pixel containing the
    forward projection of its center (nearest neighbor); centers outside
    the source extent become no-data.
    """
    img = read_tiff(path)
    model_type = img.geokeys.get(KEY_MODEL_TYPE)
    if model_type != MODEL_TYPE_PROJECTED:
        raise FormatError(f"GTModelTypeGeoKey is {model_type}, expected a projected file")
    pcs = img.geokeys.get(KEY_PROJECTED_CS_TYPE)
    if pcs not in (ESRI_WORLD_MOLLWEIDE, 32767):
        raise FormatError(f"ProjectedCSTypeGeoKey {pcs} is not the supported Mollweide frame")
    if img.array.dtype != np.uint8:
        raise FormatError("Mollweide ingest supports uint8 class rasters only")

    sx, sy = img.pixel_scale
    x0, y0 = img.model_origin
    src = img.array
    src_nodata = NODATA_CODE if img.nodata is None else int(img.nodata)
    h, w = src.shape

    out = np.full((target.height, target.width), NODATA_CODE, dtype=np.uint8)
    lons = target.center_lons()
    for row in range(target.height):
        lat = target.origin_lat - (row + 0.5) * target.res_deg
        x, y = mollweide_forward(lons, np.full_like(lons, lat))
        cols = np.floor((x - x0) / sx).astype(np.int64)
        rows = np.floor((y0 - y) / sy).astype(np.int64)
        ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        vals = src[rows[ok], cols[ok]]
        line = out[row]
        line[np.flatnonzero(ok)] = vals
        line[line == src_nodata] = NODATA_CODE
    cats = tuple(int(c) for c in np.unique(out) if c != NODATA_CODE)
    out.setflags(write=False)
    return CategoricalRaster(target, out, cats)
