"""Semantic objects in diachronic embedding spaces: extraction, alignment and change metrics."""

__version__ = "0.1.0"
