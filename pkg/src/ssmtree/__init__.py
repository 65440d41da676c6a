"""Growing couplings of self-similar Markov trees.

A numerical library for decorated random trees built from characteristic
quadruplets (a, sigma^2, Xi; alpha): a catalog of splitting measures,
growing-function families and their generators, critical self-similarity
exponents, coupled jump-SDE simulation of decoration-reproduction
processes, and recursive construction of nested decorated trees.
"""

from .sequences import DecorationSequence
from .measures import (
    SplittingMeasure,
    CharacteristicQuadruplet,
    BifurcatorWeights,
    get_measure,
    get_quadruplet,
    catalog_keys,
    cumulant,
    levy_exponent,
    compensated_drift,
    sample_atoms,
    apply_bifurcator,
    y1_moment_bound,
)

__version__ = "0.1.0"
