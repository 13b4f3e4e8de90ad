"""Low-band-assisted sub-THz radio-unit selection with inter-band beam configuration inference."""

__version__ = "0.1.0"
