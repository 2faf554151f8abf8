"""Range-image and voxel preprocessing for LiDAR point clouds."""

from os import environ
from pathlib import Path

PROJECT_PATH = Path()

THREADS_ENV = "RANGECORE_THREADS"
"""Environment variable holding the default worker thread count."""


def get_params_file():  # noqa: D103
    return PROJECT_PATH / "params.yaml"


def get_default_threads() -> int:
    """Get the default thread count from the environment, falling back to one."""
    value = environ.get(THREADS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1
