"""Nonsmooth dynamic programming toolkit package."""
