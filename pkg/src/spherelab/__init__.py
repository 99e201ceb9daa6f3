"""Arithmetic spherical averages and maximal functions on Z^d."""

__version__ = "0.1.0"

from .errors import (BudgetExceeded, CapExceeded, DimensionTooSmall, EmptySequence, InsufficientData,
                     InvalidConfig, InvalidDimensionValue, InvalidExponent, InvalidParams, InvalidSpec,
                     NotPrime, ParseError, SphereLabError)
from .grid import GridFunction, NormReport, average, lp_norm, maximal
from .lattice import (RepCountTable, SphereSpec, count_reps, count_reps_upto, enumerate_sphere,
                      jacobi_r4, residue_class_counts)
from .probes import ProbeResult, delta_test, divergence_slope, periodic_padic_probe
from .sequences import (DeclaredDims, DimensionProfile, DimValue, EtaReport, SequenceTruncation,
                        dyadic_profile, estimate_dimension, eta, generate, geometric, lacunary_random,
                        load_sequence, naturals, padic_cover, padic_profile, sequence_eta, squares)
