"""
Test package for grid dynamic programming.
"""
