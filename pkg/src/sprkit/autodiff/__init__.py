from .engine import (
    Graph,
    Tensor,
    absolute,
    add,
    backward,
    broadcast_cols,
    broadcast_rows,
    concat_rows,
    elementwise,
    exp,
    matmul,
    mul,
    neg,
    no_grad,
    ones_const,
    param,
    reciprocal,
    reduce,
    reduce_mean,
    reduce_sum,
    repeat_rows,
    reshape,
    scale,
    silu,
    slice_rows,
    softplus,
    sqrt,
    sub,
    tanh,
    tensor,
    tile_block,
    unary,
)
from .optim import AdamW, warmup_cosine_lr
from .checkpoint import MAGIC, load_checkpoint, save_checkpoint

__all__ = [
    "Graph", "Tensor", "absolute", "add", "backward", "broadcast_cols",
    "broadcast_rows", "concat_rows", "elementwise", "exp", "matmul", "mul",
    "neg", "no_grad", "ones_const", "param", "reciprocal", "reduce",
    "reduce_mean", "reduce_sum", "repeat_rows", "reshape", "scale", "silu",
    "slice_rows", "softplus", "sqrt", "sub", "tanh", "tensor", "tile_block",
    "unary", "AdamW", "warmup_cosine_lr", "MAGIC", "load_checkpoint",
    "save_checkpoint",
]
