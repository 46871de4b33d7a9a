"""
PyRobust - generalized robustness measures and their discrimination games
"""

__version__ = '1.0.0'
