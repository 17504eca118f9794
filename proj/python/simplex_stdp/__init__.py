"""Hebbian STDP as noisy gradient descent on the probability simplex."""

from ._core import (
    ConfigError,
    IntegrationError,
    InvalidInput,
    PreconditionError,
    __version__,
    barycentric,
    corr_params,
    critical_points,
    entropic_step,
    exact_d2,
    flow_bound,
    flow_rate,
    integrate_flow,
    iterations_for,
    loss,
    loss_gradient,
    loss_hessian,
    max_alpha,
    multiplicative_step,
    probabilities_from_weights,
    run_scenario,
    run_trajectory,
    scenario_names,
    stdp_increment,
    step_probabilities,
)

__all__ = [
    "ConfigError",
    "IntegrationError",
    "InvalidInput",
    "PreconditionError",
    "__version__",
    "barycentric",
    "corr_params",
    "critical_points",
    "entropic_step",
    "exact_d2",
    "flow_bound",
    "flow_rate",
    "integrate_flow",
    "iterations_for",
    "loss",
    "loss_gradient",
    "loss_hessian",
    "max_alpha",
    "multiplicative_step",
    "probabilities_from_weights",
    "run_scenario",
    "run_trajectory",
    "scenario_names",
    "stdp_increment",
    "step_probabilities",
]
