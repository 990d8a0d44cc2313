"""gridsentry: smart-grid covert attack / fault simulation and detection testbed."""

__version__ = "0.1.0"
