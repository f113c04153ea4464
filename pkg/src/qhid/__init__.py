"""Hamiltonian identification from single-observable measurement time traces."""
