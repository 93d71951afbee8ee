"""Real-time impact of economic shocks on electricity load and GDP."""

__version__ = "0.1.0"
