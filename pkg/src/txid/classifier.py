"""Scikit-learn style wrapper around the from-scratch network, for use on
fixed feature arrays (the online experiment protocol lives in trainer)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import NonFiniteLoss
from .nn import Adam, Network, build_conv_net, build_fc_net, cross_entropy


class NetworkClassifier(BaseEstimator, ClassifierMixin):
    """fit/predict classifier over spectral features.

    X is (n, 256, 1), (n, 256, 2), or already-flat (n, d). The 'conv'
    architecture consumes the 2-D layout; 'fc' flattens it.
    """

    def __init__(self, architecture="conv", f1=8, f2=16, hidden=(200, 100, 50),
                 step_size=1e-3, batch_size=32, max_epochs=25, patience=5,
                 random_state=None, dtype="float32"):
        self.architecture = architecture
        self.f1 = f1
        self.f2 = f2
        self.hidden = hidden
        self.step_size = step_size
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.random_state = random_state
        self.dtype = dtype

    def _coerce(self, X):
        X = np.asarray(X)
        if self.architecture == "fc" and X.ndim > 2:
            X = X.reshape(len(X), -1)
        return X

    def fit(self, X, y):
        X = self._coerce(X)
        y = np.asarray(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        rng = np.random.default_rng(self.random_state)
        if self.architecture == "conv":
            spec = build_conv_net(tuple(X.shape[1:]), len(self.classes_),
                                  f1=self.f1, f2=self.f2)
        elif self.architecture == "fc":
            spec = build_fc_net(X.shape[1], len(self.classes_), hidden=self.hidden)
        else:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        self.net_ = Network(spec, rng=rng, dtype=self.dtype)
        self.net_.fit_input_scaler(X)
        adam = Adam(self.net_.params, step_size=self.step_size)
        best, since_best = np.inf, 0
        self.history_ = []
        for epoch in range(self.max_epochs):
            order = rng.permutation(len(X))
            losses = []
            for start in range(0, len(X), self.batch_size):
                sel = order[start : start + self.batch_size]
                loss, grads = self.net_.loss_and_grads(X[sel], y_idx[sel])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss {loss} at epoch {epoch}")
                adam.step(grads)
                losses.append(loss)
            epoch_loss = float(np.mean(losses))
            self.history_.append(epoch_loss)
            if epoch_loss < best - 1e-4:
                best, since_best = epoch_loss, 0
            else:
                since_best += 1
                if since_best >= self.patience:
                    break
        return self

    def predict_proba(self, X):
        X = self._coerce(X)
        return self.net_.forward(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def loss(self, X, y):
        y_idx = np.searchsorted(self.classes_, np.asarray(y))
        return cross_entropy(self.predict_proba(X), y_idx)
