"""Two-photon emission spectra of semiconductors and coincidence-counting simulation."""

__version__ = "0.1.0"
