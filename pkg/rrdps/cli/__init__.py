from .main import parse_and_dispatch

__all__ = ["parse_and_dispatch"]
