from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
import os

# Determine the project root directory. Assumes config.py is in a 'src' subdirectory.
# So, the parent of the parent of this file's directory is the project root.
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DOTENV_PATH = os.path.join(PROJECT_ROOT, ".env")


class Settings(BaseSettings):
    # Certification defaults
    delta: float = Field(0.01, validation_alias="BELLRAND_DELTA")
    eps_ext: float = Field(2.0**-32, validation_alias="BELLRAND_EPS_EXT")
    stat_alpha: float = Field(0.001, validation_alias="BELLRAND_STAT_ALPHA")

    # Settings sampler (expansion step 2)
    sampler_block_size: int = Field(512, validation_alias="SAMPLER_BLOCK_SIZE")
    sampler_precision_bits: int = Field(48, validation_alias="SAMPLER_PRECISION_BITS")

    # Audit ledger settings
    database_url: str = Field("sqlite:///data/audit.db", validation_alias="DATABASE_URL")
    db_echo_log: bool = Field(False, validation_alias="DB_ECHO_LOG")
    audit_enabled: bool = Field(False, validation_alias="AUDIT_ENABLED")

    # Filesystem locations
    forensics_dir: str = Field("runs", validation_alias="FORENSICS_DIR")
    log_dir: str = Field("logs", validation_alias="LOG_DIR")
    log_level: str = Field("INFO", validation_alias="LOG_LEVEL")

    model_config = SettingsConfigDict(
        env_file=DOTENV_PATH, env_file_encoding="utf-8", extra="ignore"
    )


settings = Settings()
