"""Utility modules for the nsdp package."""
