"""Semi-supervised inductive node classification with a label-reconstructing
variational graph auto-encoder and self-label augmentation."""

from .autodiff import Tape, grad_check
from .data import (
    Dataset,
    SbmConfig,
    SplitAssignment,
    generate_sbm,
    load_dataset,
    load_splits,
    make_splits,
    save_dataset,
    save_splits,
)
from .graph import (
    SparseGraph,
    apply_node_mask,
    induce_training_subgraph,
    normalize_adjacency,
    sample_node_mask,
)
from .metrics import accuracy, confusion_matrix, mcc
from .slam import augment, confidence_filter, generate_pseudo_labels
from .trainer import Ablation, TrainConfig, evaluate, predict, train

__version__ = "0.1.0"
