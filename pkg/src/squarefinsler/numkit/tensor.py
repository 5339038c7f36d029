"""Small dense tensors with index variance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UPPER = "u"
LOWER = "l"


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


@dataclass(frozen=True)
class Tensor:
    """Dense tensor of rank 0..4 over an ``n``-dimensional space.

    ``variance`` holds one flag per slot, ``"u"`` (upper) or ``"l"`` (lower).
    """

    entries: np.ndarray
    variance: tuple = ()

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        variance = tuple(self.variance) if self.variance else (LOWER,) * entries.ndim
        object.__setattr__(self, "variance", variance)
        if entries.ndim > 4:
            raise ContractViolation("tensor rank must be at most 4")
        if len(set(entries.shape)) > 1:
            raise ContractViolation(f"all slots must share one dimension, got {entries.shape}")
        if len(variance) != entries.ndim or set(variance) - {UPPER, LOWER}:
            raise ContractViolation("variance must give 'u' or 'l' per slot")

    @property
    def rank(self):
        return self.entries.ndim

    @property
    def dims(self):
        return self.entries.shape[0] if self.rank else 0

    def __add__(self, other):
        if self.variance != other.variance:
            raise ContractViolation("cannot add tensors of different variance")
        return Tensor(self.entries + other.entries, self.variance)

    def __sub__(self, other):
        if self.variance != other.variance:
            raise ContractViolation("cannot subtract tensors of different variance")
        return Tensor(self.entries - other.entries, self.variance)

    def norm(self):
        return float(np.linalg.norm(self.entries))

    def allclose(self, other, rtol=1e-12, atol=0.0):
        return self.variance == other.variance and np.allclose(
            self.entries, other.entries, rtol=rtol, atol=atol)


def _require_rank2(t):
    if t.rank != 2:
        raise ContractViolation(f"expected a rank-2 tensor, got rank {t.rank}")


def symmetrize(t):
    """``(T + T^T) / 2`` for a rank-2 tensor."""
    _require_rank2(t)
    e = t.entries
    return Tensor((e + e.T) / 2, t.variance)


def antisymmetrize(t):
    """``(T - T^T) / 2`` for a rank-2 tensor."""
    _require_rank2(t)
    e = t.entries
    return Tensor((e - e.T) / 2, t.variance)


def _move_slot(t, slot, metric, to):
    if not 0 <= slot < t.rank:
        raise ContractViolation(f"slot {slot} out of range for rank {t.rank}")
    frm = LOWER if to == UPPER else UPPER
    if t.variance[slot] != frm:
        raise ContractViolation(f"slot {slot} is not {'lower' if frm == LOWER else 'upper'}")
    e = np.tensordot(metric, t.entries, axes=([1], [slot]))
    e = np.moveaxis(e, 0, slot)
    variance = list(t.variance)
    variance[slot] = to
    return Tensor(e, tuple(variance))


def raise_index(t, slot, metric_inverse):
    """Raise `slot` with the inverse metric ``a^{ij}``."""
    return _move_slot(t, slot, np.asarray(metric_inverse, dtype=float), UPPER)


def lower_index(t, slot, metric):
    """Lower `slot` with the metric ``a_{ij}``."""
    return _move_slot(t, slot, np.asarray(metric, dtype=float), LOWER)
