"""Evaluation: text overlap metrics, map connectivity, the map-text
aligner, and corpus-level reports.  Figure rendering lives in the
``figures`` submodule and is imported on demand."""

from .aligner import (
    Aligner,
    AlignerConfig,
    align_score,
    encode_grids,
    encode_prompts,
    load_aligner,
    retrieval_accuracy,
    save_aligner,
    train_aligner,
)
from .connectivity import ConnectivityReport, connectivity_report
from .reports import (
    MODES,
    corpus_eval,
    first_as_reference,
    grouped_text_eval,
    map_eval,
    scatter_eval,
    text_eval,
    write_csv,
    write_json,
)
from .text import (
    TextMetricReport,
    bleu,
    edit_distance,
    meteor_lite,
    rouge_l,
    text_report,
)

__all__ = [
    "Aligner", "AlignerConfig", "align_score", "encode_grids", "encode_prompts",
    "load_aligner", "retrieval_accuracy", "save_aligner", "train_aligner",
    "ConnectivityReport", "connectivity_report",
    "MODES", "corpus_eval", "first_as_reference", "grouped_text_eval",
    "map_eval", "scatter_eval", "text_eval", "write_csv", "write_json",
    "TextMetricReport", "bleu", "edit_distance", "meteor_lite", "rouge_l",
    "text_report",
]
