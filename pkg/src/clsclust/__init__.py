"""Canonical Least Squares (CLS) clustering for two-view data.

Also provides CCA, CCA clustering, cluster-wise linear regression and k-means
baselines, a synthetic data generator and stock-return feature extraction.
"""

__version__ = "0.1.0"

from .cca import CcaComponents, cca_affine_invariance_check, fit_canonical_regressions, fit_cca
from .cls import ClsComponents, ClsFitReport, cls_point_error, cls_point_errors, cls_transform, fit_cls
from .clustering import (
    ClusterResult,
    FitConfig,
    cca_cluster,
    cls_cluster,
    cls_label_step,
    clusterwise_regression,
    kmeans,
    multi_restart,
)
from .datagen import SynthConfig, SynthDataset, generate_synthetic, generate_train_test
from .errors import ConfigError, DataError, InfeasibleError
from .linalg import center_columns, least_squares_solve, residual_gram, scale_unit_variance, standardize, sym_eig
from .metrics import elbow_table, label_agreement, r_squared
