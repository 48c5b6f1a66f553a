"""Process-level settings."""
from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Solver settings loaded from environment variables (prefix SUBSONIC_)."""

    # Logging
    log_level: str = "INFO"

    # Execution
    default_threads: int = 1
    checkpoint_every: int = 25  # Picard iterations between checkpoints

    # Numerics
    quadrature_nodes: int = 2048
    streamline_count: int = 16
    near_sonic_tol: float = 1e-9
    linear_refactor_iters: int = 40  # refactor the preconditioner beyond this

    class Config:
        env_prefix = "SUBSONIC_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
