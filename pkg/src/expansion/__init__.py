"""Randomness expansion: seed-accounted settings sampling and the four-step protocol."""
