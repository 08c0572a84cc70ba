"""Bridge from transformer token-classification checkpoints (or a mock
oracle) to the OncoNER prediction interchange."""

from .core import AdapterConfig, AdapterError, CANONICAL_TAGS

__version__ = "0.1.0"
