"""Reaction systems with nonlocal dispersal on a growing one-dimensional habitat.

The habitat is ``rho(t) * (0, 1)``. Solutions are computed on the fixed
reference interval, where growth shows up as a rescaled kernel and a
dilution term. Modules:

- ``kernels``, ``growth``, ``models``: the ingredients
- ``discretization``, ``simulate``: the method of lines with RK4
- ``spectral``, ``steady``: threshold quantities and long-time states
- ``verify``: numerical checks of the structural properties
- ``cli``: the scenario runner
"""
__version__ = "0.1.0"
