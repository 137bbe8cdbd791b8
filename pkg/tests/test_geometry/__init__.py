"""
Test package for polytopes, the simplex solver and membership certificates.
"""
