from .dataset import FlowDataset, load_dataset, save_dataset
from .likelihood import (
    exact_log_density,
    standard_normal_logpdf,
    trace_jacobian_exact,
    trace_jacobian_hutchinson,
)
from .losses import reflow_loss, shortcut_loss, shortcut_loss_components, shortcut_step_sizes
from .model import (
    DiscretizationScheme,
    TimeSampler,
    TimeSamplerKind,
    VelocityField,
    euler_sample,
    sample_time,
)

__all__ = [
    "DiscretizationScheme",
    "FlowDataset",
    "TimeSampler",
    "TimeSamplerKind",
    "VelocityField",
    "euler_sample",
    "exact_log_density",
    "load_dataset",
    "reflow_loss",
    "sample_time",
    "save_dataset",
    "shortcut_loss",
    "shortcut_loss_components",
    "shortcut_step_sizes",
    "standard_normal_logpdf",
    "trace_jacobian_exact",
    "trace_jacobian_hutchinson",
]
