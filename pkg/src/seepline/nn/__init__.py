from .gradcheck import check_gradients, relative_error
from .layers import GRU, LSTM, Conv1D, Dense, Flatten, MaxPool1D, SimpleRNN, layer_from_config
from .network import PRESETS, Network, NetworkSpec, build_preset, cnn_lstm_layers, mse_loss
from .optim import Adam, AdamState, adam_step
from .train import NetworkState, TrainConfig, predict, predict_batch, train

__all__ = [
    "Adam",
    "AdamState",
    "Conv1D",
    "Dense",
    "Flatten",
    "GRU",
    "LSTM",
    "MaxPool1D",
    "Network",
    "NetworkSpec",
    "NetworkState",
    "PRESETS",
    "SimpleRNN",
    "TrainConfig",
    "adam_step",
    "build_preset",
    "check_gradients",
    "cnn_lstm_layers",
    "layer_from_config",
    "mse_loss",
    "predict",
    "predict_batch",
    "relative_error",
    "train",
]
