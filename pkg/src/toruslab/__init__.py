"""Numerical laboratory for Fourier multipliers on the flat torus.

Subpackages cover exact exponent arithmetic (:mod:`toruslab.exponents`),
lattice-point geometry (:mod:`toruslab.lattice`), oscillatory kernels
(:mod:`toruslab.kernel`), torus multipliers (:mod:`toruslab.multiplier`),
weighted exponential sums (:mod:`toruslab.weylsum`) and the scaling
experiments built on top of them (:mod:`toruslab.explab`).
"""

__version__ = "0.1.0"
