"""Diffuse-interface Stokes/Cahn-Hilliard simulation and sharp-interface limit checks."""
