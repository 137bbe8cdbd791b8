"""
Test package for scenario-tree models.
"""
