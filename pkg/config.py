import os
from dotenv import load_dotenv

load_dotenv()


def _env_number(name, default, cast=int):
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        print(f"⚠️ Ignoring malformed {name}={raw!r}, using {default}")
        return default


class Config:
    THREADS = _env_number('BRAID_THREADS', 1)
    MASTER_SEED = _env_number('BRAID_SEED', 2024)
    TRIALS = _env_number('BRAID_TRIALS', 16)
    TAU = _env_number('BRAID_TAU', 0.5, float)
    MAX_BACKTRACKS = _env_number('BRAID_MAX_BACKTRACKS', 3)
    LOG_LEVEL = os.getenv('BRAID_LOG_LEVEL', 'WARNING').upper()
