"""Physical constants (SI) and 87Rb defaults."""

import math

KB = 1.380649e-23
HBAR = 1.054571817e-34
TWO_PI = 2.0 * math.pi

RB87_MASS = 1.443e-25
# 5S1/2 -> 5P3/2 natural linewidth, angular
RB87_GAMMA_P = TWO_PI * 6.07e6
# 79D5/2 effective lifetime at 300 K
RB87_RYDBERG_LIFETIME = 209e-6

WAVELENGTH_RED = 780e-9
WAVELENGTH_BLUE = 480e-9
# 5S -> nP single-photon ground-Rydberg transition
WAVELENGTH_SINGLE_PHOTON = 297e-9
