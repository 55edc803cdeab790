"""Numerical helpers and fixture factories."""
