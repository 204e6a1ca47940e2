import logging
from pathlib import Path

from src.config import settings

# Create logs directory if it doesn't exist
logs_dir = Path(settings.log_dir)
logs_dir.mkdir(parents=True, exist_ok=True)

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.FileHandler(logs_dir / "bellrand.log"), logging.StreamHandler()],
)

# Create a logger instance
logger = logging.getLogger("bellrand")
