"""HTTP/JSON API layer."""

from .app import ApiError, create_app

__all__ = ["ApiError", "create_app"]
