"""
Test package for the Clarke calculus.
"""
