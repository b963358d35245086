"""vpop: vapor pressure and odor potency modeling on molecular graphs."""

__version__ = "0.1.0"
