"""Forced traveling waves for a three-species predator-prey system with
nonlocal dispersal in a shifting habitat."""

__version__ = "0.1.0"
