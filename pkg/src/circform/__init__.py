"""Circular formation control for constant-speed unicycles."""
