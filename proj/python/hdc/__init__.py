"""Python access to the hdc C++ core: kernels, entropies, losses, metrics and synthetic data."""

from ._hdc import (  # noqa: F401
    ContractError,
    NumericError,
    asd,
    cg_loss,
    dice,
    eigenvalues,
    generate_sample,
    gram_matrix,
    hausdorff,
    median_bandwidth,
    mutual_information,
    renyi_entropy,
    run_property_suites,
)

__all__ = [
    "ContractError",
    "NumericError",
    "asd",
    "cg_loss",
    "dice",
    "eigenvalues",
    "generate_sample",
    "gram_matrix",
    "hausdorff",
    "median_bandwidth",
    "mutual_information",
    "renyi_entropy",
    "run_property_suites",
]
