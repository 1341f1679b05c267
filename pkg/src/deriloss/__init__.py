"""Numerical companion for derivative loss in second-order hyperbolic equations
u'' + lambda^2 c(t) u = 0 with a coefficient of limited regularity.

Modules: ``moduli`` (continuity moduli and derivative bounds), ``keyquantity``
(m(lambda) and loss regimes), ``activator`` (the oscillating coefficients),
``energy`` (solver and bound checks), ``spectral`` (series demonstration) and
``cli``.
"""

__version__ = "0.1.0"
