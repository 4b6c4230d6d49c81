"""File formats: MNIST IDX, checkpoints, sparse exports, score maps and reports."""

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import FormatError
from .idx import read_idx_images, read_idx_labels, write_idx_images, write_idx_labels
from .magnitude import write_map_csv, write_map_pgm
from .reports import read_report_csv, write_report, write_summary
from .scoremaps import ScoreMapSet, read_scoremaps, write_scoremap
from .sparse import export_sparse, import_sparse
from .splits import DatasetSplit, split_dataset

__all__ = [
    "DatasetSplit",
    "FormatError",
    "ScoreMapSet",
    "export_sparse",
    "import_sparse",
    "load_checkpoint",
    "read_idx_images",
    "read_idx_labels",
    "read_report_csv",
    "read_scoremaps",
    "save_checkpoint",
    "split_dataset",
    "write_idx_images",
    "write_idx_labels",
    "write_map_csv",
    "write_map_pgm",
    "write_report",
    "write_scoremap",
    "write_summary",
]
