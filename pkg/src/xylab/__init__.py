"""XY model currents, cycle decompositions and dual height functions on small planar graphs."""

__version__ = "0.1.0"
