"""Model-parallel training by splitting a network into penalty-coupled subnetworks.

Solvers: gsADMM (``gsadmm_epoch``) and gsAM (``gsam_epoch``), with SGD/Adam
backpropagation baselines for comparison.
"""
from .data import Dataset, load_idx, synthetic_blobs, train_test_split
from .network import LossKind, NetworkSpec, Subnetwork, build_mlp, forward
from .optim import (AuxState, Hyperparams, TrainState, baseline_epoch, evaluate, gsadmm_epoch,
                    gsam_epoch, init_aux)
from .runtime import PhaseRunner
from .tensor import RngState

__version__ = "0.1.0"
