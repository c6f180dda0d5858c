"""CASSI reconstruction toolkit."""
