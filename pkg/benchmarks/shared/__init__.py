"""Shared benchmark definitions and runners."""
