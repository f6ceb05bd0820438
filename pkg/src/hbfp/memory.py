"""Weight storage and traffic accounting for HBFP versus FP32."""
from __future__ import annotations

import math
from dataclasses import dataclass

from hbfp.linalg import UNTILED
from hbfp.model import Conv2d, Dense, ModelSpec, weight_shape, weight_tile
from hbfp.training import build_model, dataset_shape

FP32_BYTES = 4


@dataclass(frozen=True)
class MemoryRow:
    layer: str
    rows: int
    cols: int
    tiles: int
    fp32_bytes: float
    compute_bytes: float
    master_bytes: float

    @property
    def elements(self):
        return self.rows * self.cols

    @property
    def compute_reduction(self):
        """FP32 bytes over narrow compute-copy bytes (forward/backward weight traffic)."""
        return self.fp32_bytes / self.compute_bytes

    @property
    def master_fraction(self):
        """Wide master-copy bytes as a fraction of FP32 bytes."""
        return self.master_bytes / self.fp32_bytes


def tile_count(shape, tile) -> int:
    if tile is UNTILED:
        return 1
    tr, tc = (tile, tile) if isinstance(tile, int) else tile
    return math.ceil(shape[0] / tr) * math.ceil(shape[1] / tc)


def bfp_bytes(elements: int, tiles: int, width: int, exponent_bits: int) -> float:
    return (elements * width + tiles * exponent_bits) / 8


def weight_memory(model: ModelSpec, w_narrow: int, w_wide: int, tile, exponent_bits: int = 16) -> list:
    """One row per weight layer plus a ``total`` row. Biases are not counted."""
    rows = []
    for i, layer in enumerate(model.layers):
        if not isinstance(layer, (Dense, Conv2d)):
            continue
        shape = weight_shape(layer)
        n = shape[0] * shape[1]
        tiles = tile_count(shape, weight_tile(layer, tile))
        rows.append(MemoryRow(
            f"layer{i}", shape[0], shape[1], tiles, float(n * FP32_BYTES),
            bfp_bytes(n, tiles, w_narrow, exponent_bits), bfp_bytes(n, tiles, w_wide, exponent_bits),
        ))
    total = MemoryRow(
        "total", sum(r.elements for r in rows), 1, sum(r.tiles for r in rows),
        sum(r.fp32_bytes for r in rows), sum(r.compute_bytes for r in rows), sum(r.master_bytes for r in rows),
    )
    return rows + [total]


MEMORY_HEADER = ("layer", "rows", "cols", "elements", "tiles", "fp32_bytes", "compute_bytes", "master_bytes",
                 "compute_reduction", "master_fraction")


def format_memory_csv(rows) -> str:
    lines = [",".join(MEMORY_HEADER)]
    for r in rows:
        lines.append(
            f"{r.layer},{r.rows},{r.cols},{r.elements},{r.tiles},{r.fp32_bytes:g},{r.compute_bytes:g},"
            f"{r.master_bytes:g},{r.compute_reduction:.4f},{r.master_fraction:.4f}"
        )
    return "\n".join(lines) + "\n"


def report_memory(cfg) -> list:
    """Accounting table for the model a config would train."""
    model = build_model(cfg, *dataset_shape(cfg))
    return weight_memory(model, cfg.w_narrow, cfg.w_wide, cfg.tile, cfg.exponent_bits)
