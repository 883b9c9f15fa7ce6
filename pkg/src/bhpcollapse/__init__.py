"""Data collapse of rescaled daily index returns onto the universal BHP density.

The package tests whether the standardized, power-rescaled positive and
negative daily returns of a price index follow the universal BHP fluctuation
distribution, locates the rescaling exponent that maximizes the
Kolmogorov-Smirnov P value, and derives the induced analytic density of the
raw returns.
"""

__version__ = "0.1.0"

from .alpha_scan import ScanResult, evaluate_alpha, refine, scan
from .bhp import (
    BhpParams,
    BhpTable,
    TruncatedBhp,
    bhp_pdf_raw,
    build_table,
    cdf,
    lattice_eigenvalues,
    load_or_build,
    pdf,
    read_table,
    sample,
    truncate,
    write_table,
)
from .collapse import (
    CollapseRecord,
    Histogram,
    HistogramSpec,
    TransformedPdf,
    histogram,
    overlay,
    report,
    return_collapse,
    transformed_pdf,
    write_collapse_tsv,
)
from .errors import (
    BhpCollapseError,
    DegenerateDataError,
    InputFormatError,
    InsufficientDataError,
    InvalidParameterError,
    NumericalConvergenceError,
    ScanFailedError,
)
from .ks import (
    EmpiricalCdf,
    KsResult,
    distance_curve,
    empirical_cdf,
    kolmogorov_survival,
    ks_pvalue,
    ks_statistic,
    ks_test,
    refined_grid,
)
from .returns import (
    NEGATIVE,
    POSITIVE,
    FluctuationSet,
    PriceSeries,
    ReturnSeries,
    compute_returns,
    fluctuations,
    load_price_csv,
    partition,
    rescale_stats,
)

__all__ = [
    "__version__",
    "BhpCollapseError",
    "BhpParams",
    "BhpTable",
    "CollapseRecord",
    "DegenerateDataError",
    "EmpiricalCdf",
    "FluctuationSet",
    "Histogram",
    "HistogramSpec",
    "InputFormatError",
    "InsufficientDataError",
    "InvalidParameterError",
    "KsResult",
    "NEGATIVE",
    "NumericalConvergenceError",
    "POSITIVE",
    "PriceSeries",
    "ReturnSeries",
    "ScanFailedError",
    "ScanResult",
    "TransformedPdf",
    "TruncatedBhp",
    "bhp_pdf_raw",
    "build_table",
    "cdf",
    "compute_returns",
    "distance_curve",
    "empirical_cdf",
    "evaluate_alpha",
    "fluctuations",
    "histogram",
    "kolmogorov_survival",
    "ks_pvalue",
    "ks_statistic",
    "ks_test",
    "lattice_eigenvalues",
    "load_or_build",
    "load_price_csv",
    "overlay",
    "partition",
    "pdf",
    "read_table",
    "refine",
    "refined_grid",
    "report",
    "rescale_stats",
    "return_collapse",
    "sample",
    "scan",
    "transformed_pdf",
    "truncate",
    "write_collapse_tsv",
    "write_table",
]
