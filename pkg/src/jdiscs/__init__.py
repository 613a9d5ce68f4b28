"""Pseudoholomorphic Bishop discs attached to a totally real edge.

Modules:

* :mod:`jdiscs.geometry`  almost complex structures, normalization, dilation, edge flattening
* :mod:`jdiscs.disc_ops`  polar grids and the Cauchy, Schwarz and Cauchy-Green operators
* :mod:`jdiscs.bishop`    model discs and the Bishop-type fixed-point solver
* :mod:`jdiscs.family`    sweeps, the evaluation map, its inverse and covering checks
* :mod:`jdiscs.psh`       Levi forms, psh certificates and the subharmonic uniqueness bound
* :mod:`jdiscs.cli`       configuration, commands and file output
"""

__version__ = "0.1.0"
