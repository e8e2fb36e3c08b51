"""segkit: everything-mode segmentation toolkit.

Point-grid prompting with nearest-neighbour prompt assignment, cosine
location confidence maps, a toy trainable point-conditioned mask head,
output filtering, and a single-point evaluation protocol.
"""

from .confidence import (
    ConfidenceMap,
    FeatDirProvider,
    FeatureMap,
    LocationPrior,
    MaskEmbedding,
    ToyFeatureProvider,
    confidence_map,
    location_prior,
    mask_pooled_embedding,
    toy_encode,
)
from .data import (
    ClassEntry,
    ClassTable,
    ImageFrame,
    ImageRecord,
    InstanceMask,
    Manifest,
    dataset_stats,
    default_class_table,
    load_manifest,
    resize_to_canvas,
    save_manifest,
)
from .errors import GenerationError, LoadError, SegkitError, ValidationError
from .grid import (
    Assignment,
    PointGrid,
    assign_dataset,
    build_grid,
    nearest_neighbour_assign,
)
from .head import (
    HeadParams,
    MaskCandidate,
    PointPromptSegmenter,
    classify,
    predict_candidates,
    select_best_candidate,
)
from .losses import (
    LossReport,
    combined_loss,
    cross_entropy,
    dice_loss,
    focal_loss,
    grad_check,
)
from .metrics import (
    EvalReport,
    InstanceEval,
    classification_accuracy,
    instance_iou_acc,
    per_class_aggregate,
    render_report,
)
from .pipeline import run_everything_mode
from .postprocess import (
    FilterConfig,
    MaskCountReport,
    box_nms,
    clean_regions,
    count_masks,
    run_pipeline,
    threshold_by_pred_iou,
)
from .synth import SynthConfig, synth_generate, toy_class_table

__version__ = "0.1.0"
