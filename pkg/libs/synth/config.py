from pydantic import BaseModel, ConfigDict, Field, model_validator

# Region ids are "<city>-r000" .. "<city>-r999".
MAX_REGIONS = 999


class SynthConfig(BaseModel):
    """Parameters of the synthetic corpus and of its latent flow process."""

    n_cities: int = Field(default=50, ge=1)
    min_regions: int = Field(default=15, ge=2)
    max_regions: int = Field(default=30, ge=2, le=MAX_REGIONS)
    latent_dim: int = Field(default=4, ge=1)
    feature_dim: int = Field(default=16, ge=1)
    seed: int = Field(default=0, ge=0)
    noise: float = Field(default=0.2, ge=0)

    # Flow kernel
    flow_scale: float = Field(default=0.05, gt=0)
    pop_exponent: float = Field(default=1.0, ge=0)
    decay_km: float = Field(default=3.0, gt=0)
    productiveness_weight: float = 1.0
    attractiveness_weight: float = 1.0

    # Embeddings and populations
    embedding_noise: float = Field(default=0.1, ge=0)
    population_mu: float = 8.5
    population_sigma: float = Field(default=0.6, ge=0)

    # Geometry
    cell_km: float = Field(default=1.5, gt=0)
    jitter: float = Field(default=0.25, ge=0, lt=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        if self.max_regions < self.min_regions:
            raise ValueError(f"max_regions={self.max_regions} is below min_regions={self.min_regions}")
        if self.latent_dim > self.feature_dim:
            raise ValueError(f"latent_dim={self.latent_dim} exceeds feature_dim={self.feature_dim}")
        return self
