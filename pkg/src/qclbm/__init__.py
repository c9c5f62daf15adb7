"""Carleman-linearised lattice Boltzmann toolkit."""
