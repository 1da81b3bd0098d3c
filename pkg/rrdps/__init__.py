"""Key rates, optimisation and Monte Carlo checks for RRDPS QKD with slow basis choice."""

__version__ = "0.1.0"
