"""Energy overflow, energy outage, service rate and effective capacity of an
energy-harvesting transmitter with a battery and a data buffer."""

__version__ = "0.1.0"
