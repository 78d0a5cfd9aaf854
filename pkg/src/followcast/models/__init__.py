from .bayes import NbModel, fit_nb
from .cv import FAMILIES, CvResult, SearchResult, cross_validate, grid_search, stratified_folds
from .forest import RfModel, fit_rf
from .gbm import GbmModel, fit_gbm
from .knn import KnnModel, fit_knn
from .metrics import auc
from .tree import Tree, fit_regression_tree

__all__ = [
    "FAMILIES", "CvResult", "GbmModel", "KnnModel", "NbModel", "RfModel", "SearchResult", "Tree",
    "auc", "cross_validate", "fit_gbm", "fit_knn", "fit_nb", "fit_regression_tree", "fit_rf",
    "grid_search", "stratified_folds",
]
