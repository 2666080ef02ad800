"""Musical instrument recognition from shifted, band-averaged magnitude spectra."""

__version__ = "0.1.0"
