"""Figure scripts: pure readers of cornerlab experiment outputs."""

__version__ = "0.1.0"
