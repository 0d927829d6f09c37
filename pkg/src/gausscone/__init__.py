"""Admissible-cone operators and Gaussian dyadic geometry, with an empirical
inequality harness.

Subpackage map:

- ``measure``:   Gaussian density, admissibility function m, ball/box measures
- ``geometry``:  layers, Gaussian dyadic cubes, transfer constants, cones
- ``covering``:  Whitney decomposition and the admissible covering construction
- ``semigroup``: Ornstein-Uhlenbeck operator and semigroup on test functions
- ``operators``: maximal functions M*, T*, conical square function S
- ``verify``:    named inequality checks producing VerificationReport records
- ``figures``:   matplotlib renderings (SVG) of cubes, balls, and check curves
- ``cli``:       ``gausscone`` command line front end
"""

__version__ = "0.1.0"
