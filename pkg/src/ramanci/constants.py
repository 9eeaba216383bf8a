"""Physical constants used throughout the package (SI units)."""

HBAR = 1.054571817e-34  # reduced Planck constant, J*s
TWO_PI = 6.283185307179586
