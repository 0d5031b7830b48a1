"""Tile acquisition and per-region raster preparation."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from pydantic import BaseModel, TypeAdapter

from libs.errors import FormatError
from libs.geo.boundaries import RegionBoundary, region_tiles
from libs.geo.raster import RasterAnchor, RasterImage, RegionMask, apply_mask, crop, pixel_window, rasterize_mask, stitch
from libs.geo.tilegrid import TileBBox, TileCoord
from libs.geo.tilestore import (
    TileStore,
    read_raw_mask,
    read_raw_raster,
    write_raw_mask,
    write_raw_raster,
)
from libs.integrations.tiles import FetchConfig, FetchReport, fetch_tiles
from libs.utils.files import atomic_write_text

logger = logging.getLogger(__name__)

INDEX_FILE = "regions.json"


class PreparedRegion(BaseModel):
    """Where a region's masked raster sits in the tile grid."""

    region_id: str
    z: int
    tile_x: int
    tile_y: int
    offset_x: int
    offset_y: int
    width: int
    height: int

    def anchor(self) -> RasterAnchor:
        return RasterAnchor(
            tile=TileCoord(self.z, self.tile_x, self.tile_y),
            offset_x=self.offset_x,
            offset_y=self.offset_y,
        )

    @property
    def raster_name(self) -> str:
        return f"{self.region_id}.raw"

    @property
    def mask_name(self) -> str:
        return f"{self.region_id}.mask.raw"


_INDEX = TypeAdapter(list[PreparedRegion])


class PreparationService:
    """Service for the tile and raster stages of the pipeline."""

    @staticmethod
    def tiles_for(boundaries: Sequence[RegionBoundary], zoom: int) -> set[TileCoord]:
        """
        Union of the tiles covering every region.

        Args:
            boundaries: Region boundaries
            zoom: Tile zoom level

        Returns:
            Set of tile coordinates
        """
        tiles: set[TileCoord] = set()
        for boundary in boundaries:
            tiles |= region_tiles(boundary, zoom)
        return tiles

    @staticmethod
    def fetch(
        boundaries: Sequence[RegionBoundary],
        zoom: int,
        offline: bool = False,
        cache_dir: Optional[Union[str, Path]] = None,
        url_template: Optional[str] = None,
    ) -> FetchReport:
        """
        Populate the tile cache for ``boundaries``.

        Args:
            boundaries: Region boundaries
            zoom: Tile zoom level
            offline: Only report what the cache holds
            cache_dir: Tile cache root (settings default when omitted)
            url_template: Tile URL template (ODFLOW_TILE_URL when omitted)

        Returns:
            FetchReport
        """
        overrides = {"offline": offline}
        if cache_dir is not None:
            overrides["cache_dir"] = Path(cache_dir)
        if url_template is not None:
            overrides["url_template"] = url_template
        cfg = FetchConfig.from_settings(**overrides)
        tiles = PreparationService.tiles_for(boundaries, zoom)
        logger.info(f"{len(tiles)} tiles needed at zoom {zoom}")
        return fetch_tiles(cfg, tiles)

    @staticmethod
    def prepare_region(boundary: RegionBoundary, store: TileStore, zoom: int) -> tuple[RasterImage, RegionMask]:
        """Stitch, crop to the region's pixel window, and mask one region."""
        tiles = region_tiles(boundary, zoom)
        stitched = stitch(store.read_many(tiles), TileBBox.covering(tiles), tile_size=store.tile_size)
        x0, y0, width, height = pixel_window(boundary, stitched.geo, stitched.width, stitched.height)
        cropped = crop(stitched, x0, y0, width, height)
        mask = rasterize_mask(boundary, cropped.geo, width, height)
        return apply_mask(cropped, mask), mask

    @staticmethod
    def prepare(
        boundaries: Sequence[RegionBoundary],
        tiles_dir: Union[str, Path],
        zoom: int,
        out_dir: Union[str, Path],
    ) -> list[PreparedRegion]:
        """
        Write ``<region_id>.raw`` (masked raster) and ``<region_id>.mask.raw`` per region,
        plus a ``regions.json`` index with each raster's geo-reference.

        Args:
            boundaries: Region boundaries
            tiles_dir: Tile cache root
            zoom: Tile zoom level
            out_dir: Output directory

        Returns:
            Index entries, sorted by region id
        """
        store = TileStore(tiles_dir)
        out_dir = Path(out_dir)
        index = []
        for boundary in sorted(boundaries, key=lambda b: b.region_id):
            masked, mask = PreparationService.prepare_region(boundary, store, zoom)
            entry = PreparedRegion(
                region_id=boundary.region_id,
                z=zoom,
                tile_x=masked.geo.tile.x,
                tile_y=masked.geo.tile.y,
                offset_x=masked.geo.offset_x,
                offset_y=masked.geo.offset_y,
                width=masked.width,
                height=masked.height,
            )
            write_raw_raster(out_dir / entry.raster_name, masked)
            write_raw_mask(out_dir / entry.mask_name, mask)
            index.append(entry)
        atomic_write_text(out_dir / INDEX_FILE, _INDEX.dump_json(index, indent=1).decode() + "\n")
        logger.info(f"Prepared {len(index)} region rasters in {out_dir}")
        return index

    @staticmethod
    def load_prepared(prepared_dir: Union[str, Path]) -> list[tuple[PreparedRegion, RasterImage, RegionMask]]:
        """Read back what :meth:`prepare` wrote."""
        prepared_dir = Path(prepared_dir)
        index_path = prepared_dir / INDEX_FILE
        if not index_path.is_file():
            raise FormatError(f"no {INDEX_FILE} (run prepare first)", prepared_dir)
        try:
            entries = _INDEX.validate_json(index_path.read_bytes())
        except ValueError as e:
            raise FormatError(f"invalid region index ({e})", index_path) from e

        regions = []
        for entry in entries:
            anchor = entry.anchor()
            image = read_raw_raster(prepared_dir / entry.raster_name, anchor)
            mask = read_raw_mask(prepared_dir / entry.mask_name, anchor)
            if (image.width, image.height) != (entry.width, entry.height):
                raise FormatError(f"raster is {image.width}x{image.height}, index says {entry.width}x{entry.height}",
                                  prepared_dir / entry.raster_name)
            regions.append((entry, image, mask))
        return regions
