"""Budgeted probing of evolving follower networks for influence estimation."""

__version__ = "0.1.0"
