"""Segment categories served by the per-category integral prediction MLPs.

Positional kind (first/interior/last knot interval) combined with boundary
containment gives seven categories.  Categories whose segment contains an
integration boundary take the boundary value as a ninth network input; the
three full-interval categories use eight inputs.
"""
from __future__ import annotations

from enum import Enum


class SegmentCategory(str, Enum):
    FIRST_FULL = "first_full"
    INTERIOR_FULL = "interior_full"
    LAST_FULL = "last_full"
    FIRST_WITH_XMIN = "first_with_xmin"
    INTERIOR_WITH_XMIN = "interior_with_xmin"
    INTERIOR_WITH_XMAX = "interior_with_xmax"
    LAST_WITH_XMAX = "last_with_xmax"

    @property
    def input_size(self) -> int:
        return 9 if self.has_boundary else 8

    @property
    def has_boundary(self) -> bool:
        return "with" in self.value


#: Canonical serialization order for model bundles.
CATEGORY_ORDER = tuple(SegmentCategory)
