"""Static and model-assisted detection of gender stereotypes in Scratch projects."""

__version__ = "0.1.0"
