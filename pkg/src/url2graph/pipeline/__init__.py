from .adversarial import AdversarialSpec, perturb_adversarial, perturb_dataset
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .metrics import Metrics, auc, compute_metrics, tpr_at_fpr
from .training import build_artifacts, evaluate, predict, train

__all__ = ["AdversarialSpec", "Checkpoint", "Metrics", "TrainConfig", "auc", "build_artifacts", "compute_metrics",
           "evaluate", "load_checkpoint", "perturb_adversarial", "perturb_dataset", "predict", "save_checkpoint",
           "tpr_at_fpr", "train"]
