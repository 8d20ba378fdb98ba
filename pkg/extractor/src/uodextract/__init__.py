"""Feature/proposal extraction producing UODF v1 archives."""

__version__ = "0.1.0"
