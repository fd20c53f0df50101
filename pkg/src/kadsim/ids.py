"""Fixed-width node identifiers and XOR-metric helpers.

Identifiers live in an n-bit space. The XOR of two ids, read as an unsigned
integer, is the routing metric. Bucket indices are 1-based: bucket i holds
peers sharing exactly the first i-1 bits of the owner's id and differing at
bit i (counted from the most significant bit).
"""

from __future__ import annotations

from .errors import ConfigError


class NodeId(int):
    """An unsigned integer pinned to a fixed bit width."""

    def __new__(cls, value: int, width: int) -> "NodeId":
        if width < 1:
            raise ConfigError(f"id width must be >= 1, got {width}")
        if not 0 <= value < (1 << width):
            raise ConfigError(f"id {value} does not fit in {width} bits")
        self = super().__new__(cls, value)
        self.width = width
        return self

    @property
    def bits(self) -> str:
        return format(self, f"0{self.width}b")

    def __repr__(self) -> str:
        return f"NodeId({self.bits})"


def _check_widths(a, b) -> None:
    wa = getattr(a, "width", None)
    wb = getattr(b, "width", None)
    if wa is not None and wb is not None and wa != wb:
        raise ConfigError(f"id width mismatch: {wa} vs {wb}")


def xor_distance(a: int, b: int) -> int:
    """XOR metric between two same-width ids."""
    _check_widths(a, b)
    return int(a) ^ int(b)


def bucket_index(self_id: int, other: int, width: int | None = None) -> int:
    """1-based index of the bucket of `self_id` that `other` falls into.

    Equals (length of the common bit prefix) + 1; ranges over 1..width.
    """
    _check_widths(self_id, other)
    if width is None:
        width = getattr(self_id, "width", None) or getattr(other, "width", None)
    if width is None:
        raise ConfigError("bucket_index needs a width (NodeId args or width=)")
    if not 0 <= int(self_id) < (1 << width) or not 0 <= int(other) < (1 << width):
        raise ConfigError(f"id out of range for width {width}")
    d = int(self_id) ^ int(other)
    if d == 0:
        raise ConfigError("bucket index undefined for identical ids")
    return width - d.bit_length() + 1


def closest(target: int, candidates, count: int) -> list:
    """The `count` candidates XOR-closest to `target`.

    Ties (possible only through duplicate candidates) break by ascending
    numeric id. Returns fewer than `count` when the pool is smaller.
    """
    pool = list(candidates)
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if not pool:
        raise ConfigError("closest() needs a non-empty candidate pool")
    pool.sort(key=lambda c: (xor_distance(target, c), int(c)))
    return pool[:count]
