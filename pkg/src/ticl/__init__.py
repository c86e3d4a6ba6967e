"""Contrastive time-of-day estimation over precomputed image features.

The package trains a pair of small MLPs, a time encoder over clock-time
classes and an adaptor over frozen backbone features, into a shared unit
sphere with an InfoNCE objective, then evaluates by classification,
nearest-neighbour lookup, and cosine retrieval. Curation operators,
linear regression baselines, and a synthetic feature generator round out
the pipeline; the `ticl` command drives everything from files.
"""
from .timecore import (
    MINUTES_PER_DAY,
    ClockTime,
    Dataset,
    FeatureRecord,
    TimeLabelSpace,
    circular_diff,
    class_midpoint,
    class_of,
    dataset_from_records,
    one_hot,
    parse_clock,
)
from .model import (
    ModelParams,
    class_embedding_table,
    image_embed,
    image_embed_rows,
    init_params,
    similarity_logits,
    time_embed,
)
from .encoders import (
    RffParams,
    Time2VecParams,
    cyclic_decode,
    cyclic_encode,
    rff_encode,
    rff_init,
    t2v_encode,
    t2v_init,
)
from .train import (
    TrainConfig,
    batch_loss,
    finite_difference_grads,
    infonce_loss,
    loss_and_grads,
    train,
)
from .metrics import (
    EvalReport,
    Prediction,
    class_affinity,
    classify,
    confusion_matrix,
    evaluate_classification,
    evaluate_knn,
    hour_accuracy,
    intra_video_variance,
    knn_predict,
    observational_error,
    time_guidance_loss,
    time_mae,
    topk_accuracy,
)
from .retrieval import (
    GalleryIndex,
    RetrievalReport,
    build_index,
    query,
    recall_at_k,
    retrieval_report,
)
from .curation import (
    DbscanConfig,
    GrayImage,
    SnrError,
    SnrReport,
    brightness_by_hour,
    dbscan,
    hourly_outlier_scan,
    mean_brightness,
    night_brightness_flag,
    read_pgm,
    snr_estimate,
    stratified_split,
    utc_to_local_approx,
    write_pgm,
)
from .baselines import (
    CyclicRegressor,
    ScalarRegressor,
    fit_cyclic,
    fit_scalar,
    predict,
    predict_minutes,
)
from .synth import SynthSpec, generate, standard_suites
from .io import (
    load_model,
    read_dataset,
    read_feature_file,
    read_meta_file,
    save_model,
    write_dataset,
    write_feature_file,
    write_meta_file,
)

__version__ = "0.1.0"
