"""Data-marketplace allocation engine over federated graph queries."""

__version__ = "0.1.0"
