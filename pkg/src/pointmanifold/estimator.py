"""scikit-learn style classifier wrapping feature preparation and training."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import InvalidInputError
from .network.layers import softmax
from .network.model import AUGMENTATIONS
from .pointset import PointCloud
from .training import TrainConfig, input_graphs, prepare_features, train
from .validation import check_clouds


def _as_clouds(X):
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], PointCloud):
        return list(X)
    arr = check_clouds(X)
    return [PointCloud(a) for a in arr]


class PointManifoldClassifier(ClassifierMixin, BaseEstimator):
    """EdgeConv point-cloud classifier with optional manifold features.

    ``X`` is an ``(n_clouds, n_points, 3)`` array or a list of
    :class:`~pointmanifold.pointset.PointCloud`; every cloud is standardized
    before use. Labels may be any hashable values.

    Parameters
    ----------
    augmentation : {"none", "lle", "mp", "lle+mp"}
    profile : {"toy", "dgcnn"}
        Base layer widths; ``t`` multiplies them.
    cache_dir : str, optional
        Directory for LLE embeddings shared across fits.
    random_state : int
        Seeds initialization, shuffling and dropout.

    Attributes
    ----------
    classes_ : ndarray
    model_ : PointManifoldNet
        The network after the last epoch.
    history_ : list of dict
        Per-epoch log; the ``test_*`` columns refer to the validation data,
        or to the training data when none was given.
    """

    def __init__(self, augmentation="none", epochs=250, batch_size=32, lr0=0.1, momentum=0.9,
                 dropout=0.5, k_edgeconv=20, k_lle=12, t=1, mp_planes=3, dynamic_graph=True,
                 profile="toy", dtype="float32", cache_dir=None, random_state=0):
        self.augmentation = augmentation
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr0 = lr0
        self.momentum = momentum
        self.dropout = dropout
        self.k_edgeconv = k_edgeconv
        self.k_lle = k_lle
        self.t = t
        self.mp_planes = mp_planes
        self.dynamic_graph = dynamic_graph
        self.profile = profile
        self.dtype = dtype
        self.cache_dir = cache_dir
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr0=self.lr0, momentum=self.momentum,
            dropout=self.dropout, seed=self.random_state, k_edgeconv=self.k_edgeconv, k_lle=self.k_lle,
            t=self.t, mp_planes=self.mp_planes, dynamic_graph=self.dynamic_graph, profile=self.profile,
            dtype=self.dtype,
        )

    def _features(self, X):
        return prepare_features(_as_clouds(X), self.augmentation, self.k_lle, self.cache_dir)

    def fit(self, X, y, X_val=None, y_val=None):
        if self.augmentation not in AUGMENTATIONS:
            raise InvalidInputError(f"unknown augmentation {self.augmentation!r}")
        config = self._config()
        y = np.asarray(y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise InvalidInputError("need at least two classes")
        feats = self._features(X)
        if len(feats) != len(y):
            raise InvalidInputError(f"{len(feats)} clouds but {len(y)} labels")
        if X_val is None:
            val, y_val_enc = feats, y_enc
        else:
            val = self._features(X_val)
            y_val = np.asarray(y_val)
            unknown = np.setdiff1d(y_val, self.classes_)
            if unknown.size:
                raise InvalidInputError(f"validation labels {unknown.tolist()} do not occur in y")
            y_val_enc = np.searchsorted(self.classes_, y_val)
        spec = config.architecture(len(self.classes_))
        result = train(None, config, spec, self.augmentation, features=(feats, y_enc, val, y_val_enc))
        self.model_ = result.model
        self.history_ = result.log
        self.n_features_in_ = feats.shape[-1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        feats = self._features(X).astype(self.model_.dtype)
        return self.model_.predict_logits(feats, graph=input_graphs(self.model_, feats))

    def predict_proba(self, X):
        return softmax(self.decision_function(X).astype(np.float64))

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
