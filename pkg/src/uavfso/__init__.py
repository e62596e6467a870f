"""Ergodic capacity of hovering UAV-to-UAV free-space optical links."""

__version__ = "0.1.0"

from .capacity import (  # noqa: E402
    CapacityReport,
    NoiseModel,
    capacity_closed_form,
    capacity_exact,
    capacity_highsnr_oracle,
    capacity_large_fov,
    evaluate,
)
from .channel import LinkParameters, channel_pdf, derive_constants, outage_mass  # noqa: E402

__all__ = [
    "CapacityReport", "LinkParameters", "NoiseModel", "capacity_closed_form", "capacity_exact",
    "capacity_highsnr_oracle", "capacity_large_fov", "channel_pdf", "derive_constants",
    "evaluate", "outage_mass",
]
