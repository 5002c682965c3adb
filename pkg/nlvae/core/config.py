"""
Configuration management for the NLVAE engine.
Handles environment variables, application-wide settings, and defaults.
"""

from typing import Optional

from pydantic import BaseSettings, validator


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    # Application settings
    app_name: str = "NLVAE Zero-Shot Super-Resolution"
    app_version: str = "1.0.0"
    debug: bool = False

    # Run defaults
    output_dir: str = "out"
    workers: int = 1
    precision: str = "f32"
    plot_format: str = "svg"

    # Optional location of a standard Set5 copy for the bicubic reproduction check
    set5_dir: Optional[str] = None

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @validator("precision")
    def validate_precision(cls, v):
        """Only the two supported precision modes are accepted."""
        if v not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")
        return v

    @validator("plot_format")
    def validate_plot_format(cls, v):
        if v not in ("svg", "png"):
            raise ValueError("plot_format must be 'svg' or 'png'")
        return v

    @validator("workers")
    def validate_workers(cls, v):
        if v < 1:
            raise ValueError("workers must be at least 1")
        return v

    @validator("set5_dir")
    def validate_set5_dir(cls, v):
        if v is not None and len(v.strip()) == 0:
            return None
        return v

    class Config:
        env_prefix = "NLVAE_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings instance."""
    return settings
