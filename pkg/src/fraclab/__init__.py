"""Spectral toolkit for fractional heat flows with exponential nonlinearities.

Modules
-------
grid        periodic grids, discrete norms, FFT conventions
orlicz      exp L^p gauges, Luxemburg norms, embedding inequalities
semigroup   the fractional heat semigroup, smoothing and kappa profiles
solver      mild solutions: Picard iteration and exponential integrator
verify      regime classification, decay fits, parameter selection
cli         the ``fraclab`` command
"""

__version__ = "0.1.0"
