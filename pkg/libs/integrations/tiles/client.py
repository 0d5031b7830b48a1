import asyncio
import logging
import os
import time
from pathlib import Path
from typing import Iterable, Optional

import aiofiles
import httpx
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tenacity import (
    AsyncRetrying,
    RetryError,
    retry_if_exception,
    stop_after_attempt,
    wait_exponential_jitter,
)

from libs.config import settings
from libs.errors import FetchError
from libs.geo.tilegrid import TileCoord
from libs.geo.tilestore import TileStore

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class FetchConfig(BaseModel):
    url_template: str = Field(..., description="URL with {z}, {x} and {y} placeholders")
    cache_dir: Path = Field(default_factory=lambda: settings.tile_cache_dir)
    max_parallel: int = Field(default_factory=lambda: settings.max_parallel, ge=1)
    rate_limit: float = Field(default_factory=lambda: settings.rate_limit, gt=0)
    retries: int = Field(default_factory=lambda: settings.retries, ge=0)
    offline: bool = False
    timeout: float = Field(default_factory=lambda: settings.request_timeout, gt=0)
    backoff_initial: float = Field(default=0.5, ge=0)
    backoff_max: float = Field(default=10.0, ge=0)
    tile_ext: str = "png"

    model_config = ConfigDict(frozen=True)

    @field_validator("url_template")
    @classmethod
    def _has_placeholders(cls, value: str) -> str:
        missing = [p for p in ("{z}", "{x}", "{y}") if p not in value]
        if missing:
            raise ValueError(f"URL template is missing {', '.join(missing)}")
        return value

    @classmethod
    def from_settings(cls, **overrides) -> "FetchConfig":
        """Build a config whose template comes from ODFLOW_TILE_URL unless overridden."""
        template = overrides.pop("url_template", None) or settings.tile_url
        if not template:
            if overrides.get("offline"):
                # Offline runs never build a URL.
                template = "offline://{z}/{x}/{y}"
            else:
                raise FetchError("No tile URL template: pass one or set ODFLOW_TILE_URL")
        return cls(url_template=template, **overrides)

    def url_for(self, tile: TileCoord) -> str:
        return self.url_template.format(z=tile.z, x=tile.x, y=tile.y)


class FetchReport(BaseModel):
    fetched: list[TileCoord] = Field(default_factory=list)
    cached: list[TileCoord] = Field(default_factory=list)
    failed: list[TileCoord] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def counts(self) -> dict[str, int]:
        return {"fetched": len(self.fetched), "cached": len(self.cached), "failed": len(self.failed)}


class RateLimiter:
    """
    Spaces request starts at least ``1 / rate`` seconds apart.

    The lock is held across the sleep, so waiters queue behind one another
    and all requests share a single global rate.
    """

    def __init__(self, rate: float):
        self.interval = 1.0 / rate
        self._next_slot = 0.0
        self._lock = asyncio.Lock()

    async def acquire(self) -> None:
        async with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            if wait > 0:
                await asyncio.sleep(wait)
                now = time.monotonic()
            self._next_slot = max(now, self._next_slot) + self.interval


class _RetryableStatus(Exception):
    def __init__(self, status_code: int):
        super().__init__(f"HTTP {status_code}")
        self.status_code = status_code


def _is_retryable(error: BaseException) -> bool:
    return isinstance(error, (_RetryableStatus, httpx.TransportError))


class TileFetchClient:
    """
    Download tiles from a template-URL endpoint into a TileStore cache.

    Usage:
        async with TileFetchClient(cfg) as client:
            report = await client.fetch_tiles(tiles)
    """

    def __init__(self, cfg: FetchConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.cfg = cfg
        self.store = TileStore(cfg.cache_dir)
        self._transport = transport
        self.session: Optional[httpx.AsyncClient] = None
        self._limiter = RateLimiter(cfg.rate_limit)
        self._slots = asyncio.Semaphore(cfg.max_parallel)

    async def __aenter__(self) -> "TileFetchClient":
        if not self.cfg.offline:
            self.session = httpx.AsyncClient(
                timeout=self.cfg.timeout,
                transport=self._transport,
                headers={"User-Agent": settings.user_agent},
                follow_redirects=True,
            )
        return self

    async def __aexit__(self, *exc_info) -> None:
        await self.close()

    async def close(self) -> None:
        if self.session is not None:
            await self.session.aclose()
            self.session = None

    async def fetch_tiles(self, tiles: Iterable[TileCoord]) -> FetchReport:
        """Resolve every tile to cached, fetched or failed."""
        report = FetchReport()
        to_fetch = []
        for tile in sorted(set(tiles)):
            if self.store.has(tile):
                report.cached.append(tile)
            elif self.cfg.offline:
                report.failed.append(tile)
            else:
                to_fetch.append(tile)

        if to_fetch:
            if self.session is None:
                raise FetchError("TileFetchClient used outside its async context")
            results = await asyncio.gather(*(self._fetch_one(tile) for tile in to_fetch))
            for tile, ok in zip(to_fetch, results):
                (report.fetched if ok else report.failed).append(tile)

        counts = report.counts()
        logger.info(
            f"Tiles: {counts['fetched']} fetched, {counts['cached']} cached, {counts['failed']} failed"
        )
        return report

    async def _fetch_one(self, tile: TileCoord) -> bool:
        try:
            data = await self._download_with_retry(tile)
        except RetryError as e:
            logger.warning(f"Tile {tile} failed after {self.cfg.retries} retries: {e.last_attempt.exception()}")
            return False
        except httpx.HTTPStatusError as e:
            logger.warning(f"Tile {tile} failed: HTTP {e.response.status_code}")
            return False
        except httpx.HTTPError as e:
            logger.warning(f"Tile {tile} failed: {e}")
            return False

        try:
            await self._write_atomic(self.store.path_for(tile, self.cfg.tile_ext), data)
        except OSError as e:
            logger.warning(f"Tile {tile} could not be cached: {e}")
            return False
        return True

    async def _download_with_retry(self, tile: TileCoord) -> bytes:
        retrying = AsyncRetrying(
            stop=stop_after_attempt(self.cfg.retries + 1),
            wait=wait_exponential_jitter(initial=self.cfg.backoff_initial, max=self.cfg.backoff_max),
            retry=retry_if_exception(_is_retryable),
        )
        async for attempt in retrying:
            with attempt:
                return await self._download(tile)
        raise FetchError(f"Tile {tile}: retry loop ended without a result")  # pragma: no cover

    async def _download(self, tile: TileCoord) -> bytes:
        async with self._slots:
            await self._limiter.acquire()
            response = await self.session.get(self.cfg.url_for(tile))
        if response.status_code in RETRYABLE_STATUS:
            raise _RetryableStatus(response.status_code)
        response.raise_for_status()
        return response.content

    @staticmethod
    async def _write_atomic(path: Path, data: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = path.with_name(f".{path.name}.{os.getpid()}.{id(data)}.tmp")
        try:
            async with aiofiles.open(tmp_path, "wb") as handle:
                await handle.write(data)
            os.replace(tmp_path, path)
        except OSError:
            tmp_path.unlink(missing_ok=True)
            raise


def fetch_tiles(
    cfg: FetchConfig,
    tiles: Iterable[TileCoord],
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> FetchReport:
    """Blocking wrapper around :meth:`TileFetchClient.fetch_tiles`."""

    async def _run() -> FetchReport:
        async with TileFetchClient(cfg, transport=transport) as client:
            return await client.fetch_tiles(tiles)

    return asyncio.run(_run())
