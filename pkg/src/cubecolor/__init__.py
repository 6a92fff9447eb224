"""Color recognition for Rubik's cube stickers.

Feature extraction from face images (``features``), an offline
scatter-balance + ELM classifier (``sbelm``), training-free label
propagation recognizers (``online``), dataset handling with a synthetic
drift generator (``dataset``), and the evaluation harness (``evaluate``).
"""

from .dataset import (CubeStateRecord, DriftConfig, default_drift_config,
                      export_features, generate_synthetic, load_features,
                      load_manifest, no_drift_config)
from .evaluate import (AccuracyTable, offline_accuracy, online_accuracy,
                       score_labeling)
from .features import (UnevenPartition, default_partition, feature_3dhsv,
                       feature_16dhsv, rectify_face, rgb_to_hsv, split_blocks)
from .online import (block_distance, default_color_weights, dwlp,
                     knn_baseline, wlhp, wlhp_star)
from .sbelm import (LabeledDataset, SbElmModel, alde_fit, alde_transform,
                    compute_scatter, elm_predict, elm_train, load_model,
                    save_model, sbelm_predict, sbelm_train)

__version__ = "0.1.0"
