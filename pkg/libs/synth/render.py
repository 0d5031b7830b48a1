import logging

import numpy as np

from libs.geo.boundaries import region_tiles
from libs.geo.tilegrid import TileCoord
from libs.geo.tilestore import TileStore
from libs.synth.city import SynthCity
from libs.utils.rng import stream

logger = logging.getLogger(__name__)

DEFAULT_RENDER_ZOOM = 14
BACKGROUND = np.array([0.2, 0.2, 0.2])
BACKGROUND_TEXTURE = 0.02


def region_colours(city: SynthCity) -> tuple[np.ndarray, np.ndarray]:
    """
    Base colour and texture amplitude per region.

    Red encodes attractiveness, green productiveness and blue the log
    population; productive regions are also rougher.
    """
    attractiveness = city.attractiveness / (1.0 + city.attractiveness)
    productiveness = city.productiveness / (1.0 + city.productiveness)
    populations = np.array([g.population for g in city.geos])
    density = np.clip((np.log(populations) - 6.0) / 6.0, 0.0, 1.0)
    colours = np.stack([attractiveness, productiveness, density], axis=1)
    texture = 0.03 + 0.12 * productiveness
    return colours, texture


def render_city_tiles(
    city: SynthCity,
    store: TileStore,
    zoom: int = DEFAULT_RENDER_ZOOM,
    seed: int = 0,
) -> list[TileCoord]:
    """
    Paint every tile covering ``city`` into ``store`` as an RGB PNG.

    Returns:
        The written tiles, sorted
    """
    tiles: set[TileCoord] = set()
    for boundary in city.boundaries:
        tiles |= region_tiles(boundary, zoom)

    # Synthetic cells are lon/lat rectangles, hence pixel-aligned rectangles after projection.
    bounds = np.array([b.projected(zoom).bounds for b in city.boundaries])
    colours, texture = region_colours(city)
    rng = stream(seed, "render", city.index)
    size = store.tile_size
    offsets = np.arange(size) + 0.5

    written = []
    for tile in sorted(tiles):
        grid_x, grid_y = np.meshgrid(tile.x * size + offsets, tile.y * size + offsets)
        pixels = np.broadcast_to(BACKGROUND, (size, size, 3)).copy()
        amplitude = np.full((size, size), BACKGROUND_TEXTURE)
        for k, (min_x, min_y, max_x, max_y) in enumerate(bounds):
            inside = (grid_x >= min_x) & (grid_x <= max_x) & (grid_y >= min_y) & (grid_y <= max_y)
            pixels[inside] = colours[k]
            amplitude[inside] = texture[k]
        pixels += amplitude[:, :, None] * rng.uniform(-1.0, 1.0, size=(size, size, 3))
        store.write(tile, np.clip(pixels, 0.0, 1.0))
        written.append(tile)

    logger.info(f"Rendered {len(written)} tiles for {city.city_id} at zoom {zoom}")
    return written
