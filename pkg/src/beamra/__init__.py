"""Beam-based random access simulation for massive M2M devices, with a DDQN beam controller."""

__version__ = "0.1.0"
