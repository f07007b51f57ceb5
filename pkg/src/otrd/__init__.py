"""Rate-distortion by Blahut-Arimoto and by extremal entropic optimal transport."""
from importlib.metadata import PackageNotFoundError, version

from .blahut_arimoto import ba_capacity, ba_rd, rd_sweep_ba
from .capacity_ot import capacity_cost_matrix, capacity_sinkhorn_value, capacity_via_ot
from .exact_ot import emd
from .measures import (
    Coupling,
    DiscreteDistribution,
    DistortionMatrix,
    RDCurve,
    RDPoint,
    expected_distortion,
    hamming_matrix,
    kl_divergence,
    mutual_information,
    squared_error_matrix,
)
from .quantizer import extremal_emd_quantizer, kmeans_1d_exact, lloyd_max
from .sinkhorn import sinkhorn, sinkhorn_eps_sweep
from .sinkhorn_rd import coupling_condition_check, rd_sweep_sinkhorn, sinkhorn_rd_point

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
