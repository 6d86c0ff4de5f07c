"""Exact power-map image computations on triangular matrix groups over GF(q)."""

from .errors import SizeGuardError
from .gf import FieldElement, FieldTable, field_new
from .trimat import (
    KeySpace,
    PackedKey,
    TriMatrix,
    identity,
    mat_inv,
    mat_mul,
    mat_pow_repeated,
    mth_power_closed_form,
    pth_power_closed_form,
    triangular,
    unitriangular,
)

__all__ = [
    "FieldElement",
    "FieldTable",
    "KeySpace",
    "PackedKey",
    "SizeGuardError",
    "TriMatrix",
    "field_new",
    "identity",
    "mat_inv",
    "mat_mul",
    "mat_pow_repeated",
    "mth_power_closed_form",
    "pth_power_closed_form",
    "triangular",
    "unitriangular",
]

__version__ = "0.1.0"
