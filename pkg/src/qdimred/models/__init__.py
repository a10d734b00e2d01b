from .autoencoders import Autoencoder, TrainingDivergence, ae_train, build_autoencoder
from .pqae import PqaeModel, pqae_encode, pqae_train
from .vqc import VqcModel, vqc_evaluate, vqc_train

__all__ = [
    "Autoencoder",
    "TrainingDivergence",
    "ae_train",
    "build_autoencoder",
    "PqaeModel",
    "pqae_encode",
    "pqae_train",
    "VqcModel",
    "vqc_evaluate",
    "vqc_train",
]
