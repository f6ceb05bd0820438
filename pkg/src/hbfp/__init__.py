"""Hybrid block floating point (HBFP) arithmetic and training.

Dot products (matrix multiplications, convolutions, outer products) run in
block floating point with integer accumulation; everything else runs in
floating point.
"""
from hbfp.bfp import (
    E_MIN,
    BfpBlock,
    BfpError,
    CapacityError,
    ConversionError,
    DimensionError,
    bfp_dot,
    bfp_to_fp,
    conversion_log,
    fp_to_bfp,
)
from hbfp.config import ConfigError, ExperimentConfig
from hbfp.data import Dataset, gen_blobs, gen_spirals, load_idx, write_idx
from hbfp.estimator import BFPQuantizer, HBFPClassifier
from hbfp.layers import DualWidthWeights, shell_update
from hbfp.linalg import (
    UNTILED,
    BfpTiledMatrix,
    ConvGeometry,
    RowBlockedMatrix,
    bfp_matmul,
    bfp_outer_product,
    conv2d_bfp,
    im2col,
    row_block,
    tile_matrix,
)
from hbfp.narrowfp import quantize_narrow_float
from hbfp.rounding import NEAREST_EVEN, RoundingMode, round_value
from hbfp.training import train
from hbfp.xorshift import XorshiftState, xorshift_next

__version__ = "0.1.0"
