"""Desk-scale numerics for Herman rings, Siegel disks, circle maps and
continued fractions: exact continued-fraction arithmetic and Brjuno sums,
linearizer power series with conformal-radius estimates, rotation numbers of
circle maps and of ring orbits by winding, an invariant-curve Fourier-Newton
solver, raster classification of dynamical and parameter planes, and
pixel-counting area estimates."""

__version__ = "0.1.0"

from . import cfrac, circle, cli, herman, maps, numkit, render, siegel  # noqa: F401
