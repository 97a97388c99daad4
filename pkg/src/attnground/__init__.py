"""Training-free visual grounding from serialized attention maps."""

__version__ = "0.1.0"
