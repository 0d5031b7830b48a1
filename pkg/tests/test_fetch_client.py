import asyncio
import os
import time
from pathlib import Path

import httpx
import numpy as np
import pydantic
import pytest

from libs.config import settings
from libs.errors import FetchError
from libs.geo.tilegrid import TileCoord
from libs.geo.tilestore import encode_png
from libs.integrations.tiles.client import FetchConfig, RateLimiter, TileFetchClient, fetch_tiles

TILE_BYTES = encode_png(np.full((256, 256, 3), 0.5))
TILES = [TileCoord(4, x, y) for x in (3, 4) for y in (5, 6)]


def _config(tmp_path, **overrides):
    values = dict(
        url_template="https://tiles.test/{z}/{x}/{y}.png",
        cache_dir=tmp_path / "cache",
        max_parallel=2,
        rate_limit=1000.0,
        retries=0,
        backoff_initial=0.0,
        backoff_max=0.0,
    )
    values.update(overrides)
    return FetchConfig(**values)


class StubServer:
    """Serves a fixed tile for every path except the ones listed as missing."""

    def __init__(self, missing=(), failures_before_success=0, delay=0.0):
        self.missing = {str(t) for t in missing}
        self.failures_left = failures_before_success
        self.delay = delay
        self.requests = []
        self.in_flight = 0
        self.peak = 0

    async def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request.url.path)
        self.in_flight += 1
        self.peak = max(self.peak, self.in_flight)
        try:
            if self.delay:
                await asyncio.sleep(self.delay)
            key = request.url.path.strip("/").removesuffix(".png")
            if key in self.missing:
                return httpx.Response(404)
            if self.failures_left > 0:
                self.failures_left -= 1
                return httpx.Response(503)
            return httpx.Response(200, content=TILE_BYTES)
        finally:
            self.in_flight -= 1

    @property
    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)


async def test_fetch_three_of_four(tmp_path):
    """Tiles the server lacks are reported failed; the rest are cached."""
    server = StubServer(missing=[TILES[1]])
    cfg = _config(tmp_path)
    async with TileFetchClient(cfg, transport=server.transport) as client:
        report = await client.fetch_tiles(TILES)

    assert report.counts() == {"fetched": 3, "cached": 0, "failed": 1}
    assert report.failed == [TILES[1]]
    assert (cfg.cache_dir / "4" / "3" / "5.png").read_bytes() == TILE_BYTES
    assert not (cfg.cache_dir / "4" / "3" / "6.png").exists()


async def test_cached_tiles_are_not_refetched(tmp_path):
    """A second run finds every tile in the cache and makes no request."""
    cfg = _config(tmp_path)
    first = StubServer()
    async with TileFetchClient(cfg, transport=first.transport) as client:
        await client.fetch_tiles(TILES)
    before = {p: p.read_bytes() for p in cfg.cache_dir.rglob("*.png")}

    second = StubServer()
    async with TileFetchClient(cfg, transport=second.transport) as client:
        report = await client.fetch_tiles(TILES)

    assert report.counts() == {"fetched": 0, "cached": 4, "failed": 0}
    assert second.requests == []
    assert {p: p.read_bytes() for p in cfg.cache_dir.rglob("*.png")} == before


async def test_offline_never_touches_network(tmp_path):
    """Offline cache misses fail without a request."""
    server = StubServer()
    cfg = _config(tmp_path, offline=True)
    async with TileFetchClient(cfg, transport=server.transport) as client:
        report = await client.fetch_tiles(TILES)

    assert report.counts() == {"fetched": 0, "cached": 0, "failed": 4}
    assert server.requests == []


async def test_retry_after_server_error(tmp_path):
    """A 503 is retried and the tile is fetched on the next attempt."""
    server = StubServer(failures_before_success=1)
    cfg = _config(tmp_path, retries=2)
    async with TileFetchClient(cfg, transport=server.transport) as client:
        report = await client.fetch_tiles(TILES[:1])

    assert report.fetched == TILES[:1]
    assert len(server.requests) == 2


async def test_retries_exhausted(tmp_path):
    """Persistent server errors end as a failed tile."""
    server = StubServer(failures_before_success=10)
    cfg = _config(tmp_path, retries=1)
    async with TileFetchClient(cfg, transport=server.transport) as client:
        report = await client.fetch_tiles(TILES[:1])

    assert report.failed == TILES[:1]
    assert len(server.requests) == 2


async def test_bounded_parallelism(tmp_path):
    """Never more than max_parallel requests are in flight."""
    server = StubServer(delay=0.02)
    tiles = [TileCoord(5, x, 3) for x in range(8)]
    cfg = _config(tmp_path, max_parallel=2)
    async with TileFetchClient(cfg, transport=server.transport) as client:
        report = await client.fetch_tiles(tiles)

    assert len(report.fetched) == 8
    assert 1 <= server.peak <= 2


async def test_no_temp_files_left(tmp_path):
    """Cache writes go through a rename; no temporary file survives."""
    cfg = _config(tmp_path)
    async with TileFetchClient(cfg, transport=StubServer().transport) as client:
        await client.fetch_tiles(TILES)
    assert not list(cfg.cache_dir.rglob("*.tmp"))


async def test_cache_write_failure_marks_tile_failed(tmp_path, mocker):
    """A tile whose cache file cannot be renamed into place is failed; the others still land."""
    cfg = _config(tmp_path)
    broken = cfg.cache_dir / "4" / "3" / "5.png"
    real_replace = os.replace

    def replace(src, dst):
        if Path(dst) == broken:
            raise OSError(28, "No space left on device")
        return real_replace(src, dst)

    mocker.patch("libs.integrations.tiles.client.os.replace", side_effect=replace)
    async with TileFetchClient(cfg, transport=StubServer().transport) as client:
        report = await client.fetch_tiles(TILES)

    assert report.failed == [TILES[0]]
    assert len(report.fetched) == 3
    assert not broken.exists()
    assert not list(cfg.cache_dir.rglob("*.tmp"))


async def test_unwritable_cache_fails_every_tile(tmp_path, mocker):
    """Write errors are reported per tile instead of aborting the batch."""
    mocker.patch("libs.integrations.tiles.client.aiofiles.open", side_effect=PermissionError("read-only"))
    cfg = _config(tmp_path)
    async with TileFetchClient(cfg, transport=StubServer().transport) as client:
        report = await client.fetch_tiles(TILES)

    assert report.counts() == {"fetched": 0, "cached": 0, "failed": 4}


async def test_rate_limiter_spacing():
    """Request starts are spaced by at least 1 / rate."""
    limiter = RateLimiter(rate=20.0)
    start = time.monotonic()
    for _ in range(11):
        await limiter.acquire()
    assert time.monotonic() - start >= 0.45


def test_blocking_wrapper(tmp_path):
    """fetch_tiles runs the async client to completion."""
    report = fetch_tiles(_config(tmp_path), TILES, transport=StubServer().transport)
    assert len(report.fetched) == 4


def test_template_needs_all_placeholders(tmp_path):
    """A URL template missing {y} is rejected."""
    with pytest.raises(pydantic.ValidationError):
        _config(tmp_path, url_template="https://tiles.test/{z}/{x}.png")


def test_from_settings_without_template(mocker):
    """Online fetching needs a URL template."""
    mocker.patch.object(settings, "tile_url", None)
    with pytest.raises(FetchError):
        FetchConfig.from_settings()
    assert FetchConfig.from_settings(offline=True).offline
