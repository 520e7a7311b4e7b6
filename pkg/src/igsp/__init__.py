"""Causal structure learning from observational and general interventional data.

Graph primitives, interventional Markov equivalence, linear Gaussian
simulation, conditional independence and invariance tests, and the
permutation-based search over interventional minimal I-maps.
"""

from igsp.bench import ExperimentPlan, hamming_distance, run_experiment
from igsp.enumeration import cross_validate_theorems, enumerate_dags, partition_imec
from igsp.exceptions import (
    DegenerateDataError,
    IgspError,
    InternalError,
    InvalidArgumentError,
    NotEnoughSamplesError,
    PreconditionError,
    UnsupportedFamilyError,
)
from igsp.graph import Dag, Permutation, d_separated, markov_equivalent, skeleton, v_structures
from igsp.interventions import (
    IDag,
    TargetFamily,
    build_idag,
    i_markov_equivalent,
    i_markov_equivalent_conservative,
    perfect_i_mec_equivalent,
)
from igsp.search import SearchConfig, igsp_search, minimal_imap
from igsp.semsim import InterventionSpec, SemModel, sample_data, sample_random_dag, sample_weights
from igsp.stats import (
    DsepCiOracle,
    FisherZDecider,
    GaussianInvarianceDecider,
    HsicInvarianceDecider,
    IdagInvarianceOracle,
    fisher_z_ci,
    gaussian_invariance,
    hsic_index_invariance,
)

__version__ = "0.1.0"

__all__ = [
    "Dag", "Permutation", "d_separated", "markov_equivalent", "skeleton", "v_structures",
    "IDag", "TargetFamily", "build_idag", "i_markov_equivalent", "i_markov_equivalent_conservative",
    "perfect_i_mec_equivalent",
    "SemModel", "InterventionSpec", "sample_random_dag", "sample_weights", "sample_data",
    "fisher_z_ci", "hsic_index_invariance", "gaussian_invariance",
    "DsepCiOracle", "FisherZDecider", "IdagInvarianceOracle", "GaussianInvarianceDecider", "HsicInvarianceDecider",
    "SearchConfig", "igsp_search", "minimal_imap",
    "enumerate_dags", "partition_imec", "cross_validate_theorems",
    "ExperimentPlan", "run_experiment", "hamming_distance",
    "IgspError", "InvalidArgumentError", "PreconditionError", "UnsupportedFamilyError", "InternalError",
    "NotEnoughSamplesError", "DegenerateDataError",
]
