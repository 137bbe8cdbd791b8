"""
Test package for feasibility sets and viability checks.
"""
