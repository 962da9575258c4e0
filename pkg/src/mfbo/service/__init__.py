"""HTTP layer: FastAPI app plus its request/response models."""

from .app import create_app

__all__ = ["create_app"]
