"""Stochastic Koopman spectral estimation.

Thin wrapper over the compiled core: simulate SDE snapshot ensembles, build
Gram pairs and semigroup operators, extract generator spectra, learn neural
dictionaries, and run the packaged experiments.
"""

from ._core import (
    CoefficientEstimate,
    ConfigError,
    Dictionary,
    GramPair,
    InvariantFailure,
    KoopmanApproximation,
    NetworkDictionary,
    SdeModel,
    SdmdError,
    SnapshotEnsemble,
    SpectralResult,
    TrainResult,
    TrainTrace,
    analytic_eigenfunction_eval,
    analytic_generator_eigs,
    default_gamma,
    edmd_operator,
    eigenfunction_series,
    evaluate_dictionary,
    export_ensemble,
    generate_ensemble,
    generator_matrix,
    generator_to_semigroup,
    gedmd_operator,
    import_ensemble,
    koopman_eigenfunction_eval,
    make_dictionary,
    make_fourier,
    make_gaussian_rbf,
    make_hermite,
    make_monomial,
    make_neural_mass,
    make_ou,
    make_stuart_landau_cartesian,
    make_stuart_landau_polar,
    make_triple_well,
    make_gram,
    match_modes,
    mode_similarity,
    model_from_spec,
    operator_spectrum,
    run_experiment,
    run_invariant_preflight,
    sdmd_operator,
    semigroup_to_generator,
    set_thread_count,
    spectrum,
    thread_count,
    train,
)

__all__ = [
    "CoefficientEstimate",
    "ConfigError",
    "Dictionary",
    "GramPair",
    "InvariantFailure",
    "KoopmanApproximation",
    "NetworkDictionary",
    "SdeModel",
    "SdmdError",
    "SnapshotEnsemble",
    "SpectralResult",
    "TrainResult",
    "TrainTrace",
    "analytic_eigenfunction_eval",
    "analytic_generator_eigs",
    "default_gamma",
    "edmd_operator",
    "eigenfunction_series",
    "evaluate_dictionary",
    "export_ensemble",
    "generate_ensemble",
    "generator_matrix",
    "generator_to_semigroup",
    "gedmd_operator",
    "import_ensemble",
    "koopman_eigenfunction_eval",
    "make_dictionary",
    "make_fourier",
    "make_gaussian_rbf",
    "make_hermite",
    "make_monomial",
    "make_neural_mass",
    "make_ou",
    "make_stuart_landau_cartesian",
    "make_stuart_landau_polar",
    "make_triple_well",
    "make_gram",
    "match_modes",
    "mode_similarity",
    "model_from_spec",
    "operator_spectrum",
    "run_experiment",
    "run_invariant_preflight",
    "sdmd_operator",
    "semigroup_to_generator",
    "set_thread_count",
    "spectrum",
    "thread_count",
    "train",
]
