"""Exact and asymptotic tools for the Boltzmann distribution of 2-colorings
of random k-uniform hypergraphs."""

from .errors import CapacityError, DomainError, ParameterError, ParseError
from .hypergraph import (Coloring, Hypergraph, ModelParams, format_coloring, format_hypergraph, generate,
                         monochromatic_count, overlap, parse_coloring, parse_hypergraph)
from .enumeration import Restriction, SpectrumTable, cluster_log, log_partition, partition_log, spectrum
from .moments import first_moment_log, second_moment_alpha_log, second_moment_log
from .phase import (beta_crit_expansion, beta_crit_root, classify_regime, condensation_gap, lambda_eval,
                    phi_upper, second_moment_verdict, sigma)
from .planted import gen_planted
from .decomposition import (LARGE_K_THRESHOLDS, PROFILES, Thresholds, cluster_log_estimate, core_peel, decompose,
                            whitening)

__version__ = "0.1.0"
