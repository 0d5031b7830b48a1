"""Template-URL imagery tile client."""

from .client import FetchConfig, FetchReport, RateLimiter, TileFetchClient, fetch_tiles

__all__ = ["FetchConfig", "FetchReport", "RateLimiter", "TileFetchClient", "fetch_tiles"]
