"""Link-level and network-level models for THz and mmWave access links."""

__version__ = "0.1.0"
