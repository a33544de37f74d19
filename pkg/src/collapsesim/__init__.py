"""Monte Carlo simulation of dynamical state reduction.

Modules
-------
hilbert      truncated tensor-product spaces and operators
stochastic   seeded streams, Poisson processes, hit-value sampling
grw          particle localization on a position grid
fieldloc     number-density localization of a lattice boson field
relmodel     relativistic mechanism with a static mediating field
experiments  seeded statistical checks of the models
cli          command-line runner
"""

__version__ = "0.1.0"
