"""runvar: characterize, predict, and explain runtime variation of recurring jobs."""

__version__ = "0.1.0"
