"""coffeevision: coffee-branch photo analysis toolkit.

Turns box-annotated branch photos into machine-labeled maturity datasets via
CIELAB color clustering, evaluates detector output (IoU / AP / mAP@.5),
tracks ripeness percentages over a season, and serves it all over REST for
the browser field console.
"""

from .annotations import (DEFAULT_STAGE_NAMES, LabelFile, NormalizedBox,
                          Prediction, PredictionFile, convert_labelstudio,
                          parse_predictions, parse_yolo_label,
                          serialize_predictions, serialize_yolo_label)
from .autolabel import RelabelJob, compare_labelings, relabel
from .clustering import (KMeansModel, MaturityMap, PcaProjection, kmeans_fit,
                         kmeans_predict, order_clusters, pca_project, purity)
from .color import (FEATURE_DIM, PATCH_SIZE, AbFeature, crop_resize,
                    extract_ab, load_features, rgb_to_lab, save_features,
                    srgb_to_lab)
from .detectors import DetectorSpec, detect_classical, load_external
from .errors import CoffeeVisionError
from .metrics import (EvalReport, MatchResult, average_precision, evaluate,
                      iou, map_at_50, match, match_boxes, precision_recall)
from .ripeness import (DEFAULT_RIPE_STAGES, RipenessSample, StageCounts,
                       build_timeline, collapse_binary, ripeness_percent,
                       timeline_from_counts)

__version__ = "0.1.0"
