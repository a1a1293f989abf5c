from pydantic_settings import BaseSettings
from typing import List
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    # Output locations
    MAGBEND_OUTPUT_DIR: str = os.getenv("MAGBEND_OUTPUT_DIR", ".")
    MAGBEND_MODEL_PATH: str = os.getenv("MAGBEND_MODEL_PATH", "surrogate.json")
    MAGBEND_LOG_LEVEL: str = os.getenv("MAGBEND_LOG_LEVEL", "INFO")
    MAGBEND_SLOW_REQUEST_S: float = float(os.getenv("MAGBEND_SLOW_REQUEST_S", "5.0"))

    # CORS Settings
    CORS_ORIGINS: List[str] = [
        "http://localhost",
        "http://localhost:8000",
        "http://localhost:3000",
    ]

    # Permanent magnet defaults
    MAGBEND_MAGNET_SIDE_MM: float = float(os.getenv("MAGBEND_MAGNET_SIDE_MM", "55.0"))
    MAGBEND_QUADRATURE_ORDER: int = int(os.getenv("MAGBEND_QUADRATURE_ORDER", "32"))

    # Rod solver defaults
    MAGBEND_RESOLUTION: float = float(os.getenv("MAGBEND_RESOLUTION", "2.0"))  # segments per mm
    MAGBEND_CONTINUATION_STEPS: int = int(os.getenv("MAGBEND_CONTINUATION_STEPS", "20"))
    MAGBEND_SOLVER_TOL: float = float(os.getenv("MAGBEND_SOLVER_TOL", "1e-10"))  # N*m, max-norm
    MAGBEND_SOLVER_MAX_ITERS: int = int(os.getenv("MAGBEND_SOLVER_MAX_ITERS", "500"))
    MAGBEND_FIELD_ANGLE_DEG: float = float(os.getenv("MAGBEND_FIELD_ANGLE_DEG", "90.0"))

    # Pipeline
    MAGBEND_EXTRACT_THRESHOLD: int = int(os.getenv("MAGBEND_EXTRACT_THRESHOLD", "128"))
    MAGBEND_SWEEP_WORKERS: int = int(os.getenv("MAGBEND_SWEEP_WORKERS", "1"))

    # Surrogate training
    MAGBEND_SURROGATE_EPOCHS: int = int(os.getenv("MAGBEND_SURROGATE_EPOCHS", "5000"))
    MAGBEND_SURROGATE_LR: float = float(os.getenv("MAGBEND_SURROGATE_LR", "1e-3"))
    MAGBEND_SURROGATE_SEED: int = int(os.getenv("MAGBEND_SURROGATE_SEED", "42"))
    MAGBEND_HOLDOUT_MT: float = float(os.getenv("MAGBEND_HOLDOUT_MT", "60.0"))

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True
        extra = "ignore"

settings = Settings()
