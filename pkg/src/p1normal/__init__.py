"""Exact singular normal form for y'' = 6y^2 + x and pole continuation in the complex plane."""
