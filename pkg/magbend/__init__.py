"""
magbend: field, bending and surrogate models for graded-stiffness magnetic
soft continuum robots.
"""

__version__ = "0.1.0"
