"""Non-Bayesian social learning with uncertain statistical models."""

from ulrsim._core import (
    EvidenceCounts,
    MixingMatrix,
    Topology,
    __version__,
    analyze_directory,
    ca_divergence_exact,
    ca_divergence_mc,
    consensus_gap,
    dirichlet_log_pdf,
    fit_rate,
    kl_divergence,
    lazy_metropolis,
    log_asymptotic_ulr,
    log_beta,
    log_likelihood_update,
    log_posterior_predictive,
    log_ulr,
    normalized_belief_limits,
    preset_json,
    preset_names,
    random_geometric_graph,
    run_experiment_json,
    ulrt_classify,
    uniform_complete,
    write_figure_preset,
    write_figures,
)

__all__ = [
    "EvidenceCounts",
    "MixingMatrix",
    "Topology",
    "__version__",
    "analyze_directory",
    "ca_divergence_exact",
    "ca_divergence_mc",
    "consensus_gap",
    "dirichlet_log_pdf",
    "fit_rate",
    "kl_divergence",
    "lazy_metropolis",
    "log_asymptotic_ulr",
    "log_beta",
    "log_likelihood_update",
    "log_posterior_predictive",
    "log_ulr",
    "normalized_belief_limits",
    "preset_json",
    "preset_names",
    "random_geometric_graph",
    "run_experiment_json",
    "ulrt_classify",
    "uniform_complete",
    "write_figure_preset",
    "write_figures",
]
