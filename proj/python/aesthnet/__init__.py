"""Attribute-conditioned aesthetic assessment toolkit."""

try:
    from ._aesthnet import *  # noqa: F401,F403
    from ._aesthnet import __doc__ as _core_doc
except ImportError:  # development layout: extension built next to the sources
    from _aesthnet import *  # noqa: F401,F403
    from _aesthnet import __doc__ as _core_doc

__all__ = [
    "mlsp_pool",
    "emd",
    "fractional_ranks",
    "srocc",
    "plcc",
    "mae",
    "rmse",
    "gen_synthetic",
    "default_config",
    "train_attributes",
    "train_aesthetic",
    "evaluate",
    "predict",
    "gen_synth",
    "export_weights",
    "DimensionError",
    "ValidationError",
    "NumericError",
]
