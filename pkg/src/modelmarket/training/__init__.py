from .attacks import apply_attack, attack_rng
from .data import SyntheticDataset, apportion, dump_csv, gen_data, load_csv
from .learner import (
    distance_matrix,
    evaluate,
    local_loss,
    local_loss_grad,
    local_train,
    model_distance,
    prox_center,
    prox_descent,
    prox_weights,
    softmax_loss_grad,
)

__all__ = [
    "SyntheticDataset", "apply_attack", "apportion", "attack_rng", "distance_matrix", "dump_csv",
    "evaluate", "gen_data", "load_csv", "local_loss", "local_loss_grad", "local_train",
    "model_distance", "prox_center", "prox_descent", "prox_weights", "softmax_loss_grad",
]
