from pathlib import Path
from typing import Optional, TypeVar, Union

import pydantic
from dotenv import dotenv_values
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from libs.errors import FormatError, ValidationError

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


class Settings(BaseSettings):
    # Tile imagery
    tile_url: Optional[str] = Field(default=None)  # ODFLOW_TILE_URL
    tile_cache_dir: Path = Field(default=Path("tiles"))
    default_zoom: int = Field(default=15, ge=0, le=22)

    # Fetch client
    max_parallel: int = Field(default=4, ge=1)
    rate_limit: float = Field(default=5.0, gt=0)
    retries: int = Field(default=3, ge=0)
    request_timeout: float = Field(default=10.0, gt=0)
    user_agent: str = Field(default="odflow/0.1 (+tile cache)")

    # Logging
    log_level: str = Field(default="INFO")

    model_config = SettingsConfigDict(
        env_prefix="ODFLOW_",
        env_file=".env",
        extra="ignore",  # Ignore unrelated entries in .env
    )


settings = Settings()


def load_config(path: Union[str, Path], model: type[ConfigModel]) -> ConfigModel:
    """
    Read a key-value config file (dotenv syntax) into a pydantic model.

    Keys are case-insensitive and map to the model's field names (or their
    lower-case aliases); unknown keys and invalid values are rejected.

    Args:
        path: Config file path
        model: Pydantic model class describing the config

    Returns:
        Validated model instance
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError("config file not found", path)

    raw = dotenv_values(path)
    values = {key.strip().lower(): value for key, value in raw.items()}
    missing_values = [key for key, value in values.items() if value is None]
    if missing_values:
        raise FormatError(f"keys without a value: {', '.join(missing_values)}", path)

    known = set(model.model_fields)
    known |= {f.alias.lower() for f in model.model_fields.values() if f.alias}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys: {', '.join(unknown)}")

    try:
        return model.model_validate(values)
    except pydantic.ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ValidationError(f"{path}: {problems}") from e
