"""FDR-controlled sparse principal component analysis with the T-Rex selector."""
from importlib.metadata import PackageNotFoundError, version

from .lars_path import PathProblem, augment_elastic_net, lars_lasso_path, terminated_path
from .metrics import confusion, cumulative_pev, ev_decomposition
from .pca import (
    SparsePcaModel,
    oracle_spca,
    oracle_thresholded_pca,
    ordinary_pca,
    trex_pca,
    trex_thresholded_pca,
)
from .trex import SelectedSupport, TrexConfig, calibrate

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "PathProblem",
    "augment_elastic_net",
    "lars_lasso_path",
    "terminated_path",
    "confusion",
    "cumulative_pev",
    "ev_decomposition",
    "SparsePcaModel",
    "oracle_spca",
    "oracle_thresholded_pca",
    "ordinary_pca",
    "trex_pca",
    "trex_thresholded_pca",
    "SelectedSupport",
    "TrexConfig",
    "calibrate",
    "__version__",
]
