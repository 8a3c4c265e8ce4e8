"""Nested rollout policy adaptation with priors learned from solved instances.

The search (:func:`gnrpa`, :func:`flat_sampling`) is generic over any object
following the :class:`SearchProblem` protocol. Priors are built by replaying
known solutions (:func:`replay_corpus`) and turned into softmax biases
``tau * ln(count / nb)`` by :class:`BiasProvider`.
"""
from .policy import (
    EXCLUDED,
    Policy,
    PlayoutResult,
    SearchParams,
    SearchResult,
    adapt,
    flat_sampling,
    gnrpa,
    playout,
    sample_index,
    softmax_distribution,
)
from .prior import (
    BiasProvider,
    PriorTable,
    frequency_histogram,
    load_prior,
    replay,
    replay_corpus,
    save_prior,
)
from .problem import (
    ContractViolation,
    CorruptPairError,
    InstanceSolutionPair,
    OracleError,
    ParseError,
    SearchProblem,
    conformance_report,
    validate_pair,
)

__version__ = "0.1.0"

__all__ = [
    "EXCLUDED", "Policy", "PlayoutResult", "SearchParams", "SearchResult", "adapt", "flat_sampling",
    "gnrpa", "playout", "sample_index", "softmax_distribution", "BiasProvider", "PriorTable",
    "frequency_histogram", "load_prior", "replay", "replay_corpus", "save_prior", "ContractViolation",
    "CorruptPairError", "InstanceSolutionPair", "OracleError", "ParseError", "SearchProblem",
    "conformance_report", "validate_pair",
]
