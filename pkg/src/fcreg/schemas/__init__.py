"""
Schemas package for fcreg

This package contains all Pydantic models used for configuration and result records.
"""

from .models import (
    DgpConfig,
    FitConfig,
    InferenceReport,
    RunConfig,
    ShockRow,
    TableSpec,
    VRConfig,
    VRReport,
)

__all__ = [
    'DgpConfig',
    'FitConfig',
    'InferenceReport',
    'RunConfig',
    'ShockRow',
    'TableSpec',
    'VRConfig',
    'VRReport',
]
