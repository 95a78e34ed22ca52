"""File I/O: GeoTIFF subset, GeoJSON, WKT footprint CSVs, report writers."""

from .reports import (
    format_real,
    read_binary_raster,
    write_binary_raster,
    write_csv,
    write_json,
    write_report,
)
from .tiff import (
    TiffImage,
    read_geotiff,
    read_mollweide_geotiff,
    read_tiff,
    write_geotiff,
    write_tiff,
)
from .vector import (
    AdminRegion,
    ExtentRecord,
    ExtentStream,
    FootprintRecord,
    FootprintStream,
    HdiTable,
    parse_wkt_polygon,
    read_admin_regions,
    read_hdi_csv,
)

__all__ = [
    "AdminRegion", "ExtentRecord", "ExtentStream", "FootprintRecord",
    "FootprintStream", "HdiTable", "TiffImage", "format_real",
    "parse_wkt_polygon", "read_admin_regions", "read_binary_raster",
    "read_geotiff", "read_hdi_csv", "read_mollweide_geotiff", "read_tiff",
    "write_binary_raster", "write_csv", "write_geotiff", "write_json",
    "write_report", "write_tiff",
]
