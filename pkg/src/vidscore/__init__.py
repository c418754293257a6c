"""vidscore: compile a silent video into a picture-synched musical soundtrack."""

__version__ = "0.1.0"
