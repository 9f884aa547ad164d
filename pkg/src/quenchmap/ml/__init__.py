from .gbt import GbtModel, gbt_predict, gbt_train
from .kernels import GramMatrix, gram_fidelity, gram_linear
from .metrics import MetricsReport, compute_metrics, roc_auc
from .svm import SvmModel, svm_predict, svm_train

__all__ = [
    "GbtModel", "gbt_predict", "gbt_train",
    "GramMatrix", "gram_fidelity", "gram_linear",
    "MetricsReport", "compute_metrics", "roc_auc",
    "SvmModel", "svm_predict", "svm_train",
]
