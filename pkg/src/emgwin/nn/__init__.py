from .layers import (conv2d, dense, dropout, global_max_pool, maxpool2x2, relu,
                     softmax)
from .network import (Network, NetworkSpec, backward, build_network, forward,
                      forward_batch, predict_proba)

__all__ = [
    "Network", "NetworkSpec", "backward", "build_network", "conv2d", "dense",
    "dropout", "forward", "forward_batch", "global_max_pool", "maxpool2x2",
    "predict_proba", "relu", "softmax",
]
