"""HTTP service exposing the pipeline operations."""

from .app import app

__all__ = ["app"]
