"""
Test package for the command-line pipelines.
"""
