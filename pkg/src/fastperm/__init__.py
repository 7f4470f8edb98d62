"""Small two-sample permutation p-values by partition decomposition.

The permutations of two groups are split by how many observations they
exchange.  Each partition has a known probability, and the within-partition
p-values follow a smooth, nearly log-linear trend.  ``p_pred`` samples the
first few partitions and extrapolates the rest; ``p_asym`` approximates every
partition in closed form.
"""

__version__ = "0.1.0"

from .asymptotic import AsymReport, m_stop_asym, n_hat, p_asym, partition_pvalue_asym, xi, xi_conj
from .errors import ConvergenceError, DataError, DomainError, FastPermError, UnsupportedError
from .glm import PoissonFit
from .partitions import ExchangeSelection, PartitionWeights, partition_weights, sample_exchange
from .resampling import PartitionCounts, PredReport, p_pred, p_simple_mc, partition_mc
from .statistics import StatisticKind, SummaryPair, TwoSample, observed_statistic, permuted_statistic

__all__ = [
    "AsymReport", "ConvergenceError", "DataError", "DomainError", "ExchangeSelection",
    "FastPermError", "PartitionCounts", "PartitionWeights", "PoissonFit", "PredReport",
    "StatisticKind", "SummaryPair", "TwoSample", "UnsupportedError", "m_stop_asym", "n_hat",
    "observed_statistic", "p_asym", "p_pred", "p_simple_mc", "partition_mc",
    "partition_pvalue_asym", "partition_weights", "permuted_statistic", "sample_exchange",
    "xi", "xi_conj",
]
