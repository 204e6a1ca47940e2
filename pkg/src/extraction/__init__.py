"""Randomness extraction: Toeplitz hashing and the bit-file format."""
