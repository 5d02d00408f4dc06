"""Joint SPX/VIX calibration by semimartingale optimal transport.

Thin wrapper over the C++ core; see the package README for the CLI and the
JSON configuration schema.
"""

from ._core import (  # noqa: F401
    InvalidInput,
    NumericFailure,
    black_implied_vol,
    black_price,
    black_vega,
    calibrate,
    conjugate_f_star,
    generate_quotes,
    heston_cf_call,
    heston_characteristics,
    infer_x2_0,
    mean_reversion_factor,
    psd_project,
    run_pipeline,
    variance_from_x2,
    vix_value,
    x2_from_variance,
)

__all__ = [
    "InvalidInput",
    "NumericFailure",
    "black_implied_vol",
    "black_price",
    "black_vega",
    "calibrate",
    "conjugate_f_star",
    "generate_quotes",
    "heston_cf_call",
    "heston_characteristics",
    "infer_x2_0",
    "mean_reversion_factor",
    "psd_project",
    "run_pipeline",
    "variance_from_x2",
    "vix_value",
    "x2_from_variance",
]
