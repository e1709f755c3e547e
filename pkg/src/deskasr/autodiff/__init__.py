from deskasr.autodiff.tensor import (
    Tape,
    Tensor,
    add,
    add_row,
    cols,
    concat,
    exp,
    get,
    log,
    log_softmax,
    lstm_cell,
    masked_softmax,
    matmul,
    mean_all,
    mul,
    neg,
    reshape,
    row,
    sigmoid,
    softmax,
    sub,
    sum_all,
    tanh,
)
from deskasr.autodiff.gradcheck import grad_check, grad_check_params

__all__ = [
    "Tape",
    "Tensor",
    "add",
    "add_row",
    "cols",
    "concat",
    "exp",
    "get",
    "grad_check",
    "grad_check_params",
    "log",
    "log_softmax",
    "lstm_cell",
    "masked_softmax",
    "matmul",
    "mean_all",
    "mul",
    "neg",
    "reshape",
    "row",
    "sigmoid",
    "softmax",
    "sub",
    "sum_all",
    "tanh",
]
