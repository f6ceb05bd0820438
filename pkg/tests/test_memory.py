import math

import pytest

from hbfp.linalg import UNTILED
from hbfp.memory import bfp_bytes, tile_count, weight_memory
from hbfp.model import mlp, small_cnn


def layer(w_narrow=8, w_wide=16, tile=24):
    return weight_memory(mlp(256, (), 256), w_narrow, w_wide, tile)[0]


def test_closed_form_bytes():
    row = layer()
    tiles = math.ceil(256 / 24) ** 2
    assert row.tiles == tiles == 121
    assert row.fp32_bytes == 256 * 256 * 4
    assert row.compute_bytes == (256 * 256 * 8 + tiles * 16) / 8
    assert row.master_bytes == (256 * 256 * 16 + tiles * 16) / 8
    assert row.compute_reduction >= 3.9
    assert row.compute_reduction == pytest.approx(262144 / 65778)
    assert row.master_fraction <= 0.8
    assert row.master_fraction == pytest.approx(131314 / 262144)


def test_no_compression_at_full_width():
    assert layer(w_narrow=32, w_wide=32).compute_reduction <= 1


def test_untiled_has_least_metadata():
    assert layer(tile=UNTILED).compute_reduction >= layer(tile=24).compute_reduction
    assert layer(tile=1).compute_reduction < layer(tile=24).compute_reduction


def test_totals_and_conv_tiles():
    rows = weight_memory(small_cnn((1, 28, 28), 10), 8, 16, 24)
    assert [r.layer for r in rows][-1] == "total"
    total = rows[-1]
    assert total.fp32_bytes == sum(r.fp32_bytes for r in rows[:-1])
    assert total.compute_bytes == sum(r.compute_bytes for r in rows[:-1])
    # first conv: 8 x 9 weights in one tile that spans whole kernels
    assert (rows[0].rows, rows[0].cols, rows[0].tiles) == (8, 9, 1)
    assert tile_count((8, 72), (24, 216)) == 1
    assert bfp_bytes(10, 2, 8, 16) == 14.0
