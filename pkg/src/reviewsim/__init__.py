"""Rating prediction from review text.

Normalize review corpora, build rating-bucketed user and item profiles, and
predict star ratings with text-similarity and collaborative-filtering
predictors, evaluated by MAE and RMSE.
"""
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .corpus import CorpusError, Dataset, Review, load_dataset, prune_min_ratings, split_train_test, stratified_sample
from .evaluation import EvalReport, mae, rmse, run_experiment
from .predictors import PREDICTOR_NAMES, Prediction, make_predictor
from .profiles import ProfileIndex, build_profiles
from .textnorm import NormConfig, normalize, porter_stem
from .vectorspace import TermVector, build_idf, cosine, term_vector

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CorpusError",
    "Dataset",
    "EvalReport",
    "ExperimentConfig",
    "NormConfig",
    "PREDICTOR_NAMES",
    "Prediction",
    "ProfileIndex",
    "Review",
    "TermVector",
    "build_idf",
    "build_profiles",
    "config_from_dict",
    "cosine",
    "load_config",
    "load_dataset",
    "mae",
    "make_predictor",
    "normalize",
    "porter_stem",
    "prune_min_ratings",
    "rmse",
    "run_experiment",
    "split_train_test",
    "stratified_sample",
    "term_vector",
]
