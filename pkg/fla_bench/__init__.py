from importlib.metadata import (
    version,
    PackageNotFoundError,
)

APP_TITLE = "FLA Bench"

try:
    __version__ = version("fla-bench")
except PackageNotFoundError:
    __version__ = "0.0.0"
