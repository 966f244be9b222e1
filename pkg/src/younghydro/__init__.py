"""Hydrodynamic limits of Young-diagram dynamics under U- and RU-statistics."""
__version__ = "0.1.0"
