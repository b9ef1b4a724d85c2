"""Sign video pretraining and translation toolkit."""

__version__ = "0.1.0"
