"""Receding-horizon UAV control for tracking drifting castaways."""

__version__ = "0.1.0"
