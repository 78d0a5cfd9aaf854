"""Follower-increase prediction from profile and name-field features."""

__version__ = "0.1.0"
