"""Tag-field inference for C-style unions and their translation to tagged unions."""

__version__ = "0.1.0"
