"""Photographer attribution from image features, plus style maps, style clustering
and pastiche synthesis."""

__version__ = "0.1.0"

from .errors import PhotoAuthorError
from .catalog import Catalog, PhotoRecord, SplitAssignment, load_manifest, make_splits
from .featstore import FeatureMatrix, read_feature_file, write_feature_file
from .attribclf import LinearModel, evaluate, predict, train_ova_svm

__all__ = [
    "Catalog", "FeatureMatrix", "LinearModel", "PhotoAuthorError", "PhotoRecord", "SplitAssignment",
    "evaluate", "load_manifest", "make_splits", "predict", "read_feature_file", "train_ova_svm",
    "write_feature_file",
]
