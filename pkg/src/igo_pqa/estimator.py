"""Scikit-learn style wrappers around the scorer and the regressor.

Both estimators keep the flat keyword-argument constructor contract so
``get_params`` / ``set_params`` / ``clone`` behave as expected.  X is a
list of Frame objects for the scorer and a list of (N, 4) point arrays
for the regressor, so the usual array validation helpers do not apply;
inputs are validated by the underlying pipeline instead.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .config import PipelineConfig
from .model import ModelConfig, ScoreRegressor
from .scoring import fit_dataset, score_frames
from .training import TrainConfig, predict_many, train


class SaliencyScoreGenerator(BaseEstimator, TransformerMixin):
    """Fits dataset statistics, then turns frames into 0-100 scores."""

    def __init__(self, object_gain=1.0, splat_radius=5.0, splat_sigma=2.5,
                 downsample=1, bin_low=34.0, bin_high=67.0):
        self.object_gain = object_gain
        self.splat_radius = splat_radius
        self.splat_sigma = splat_sigma
        self.downsample = downsample
        self.bin_low = bin_low
        self.bin_high = bin_high

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            object_gain=self.object_gain,
            splat_radius=self.splat_radius,
            splat_sigma=self.splat_sigma,
            downsample=self.downsample,
            bin_edges=(self.bin_low, self.bin_high),
        )

    def fit(self, X, y=None):
        self.manifest_ = fit_dataset(X, self._config())
        return self

    def _check_fitted(self):
        if not hasattr(self, "manifest_"):
            raise NotFittedError(
                "this SaliencyScoreGenerator instance is not fitted yet")

    def transform(self, X) -> np.ndarray:
        """Column vector of quality scores under the fitted manifest."""
        self._check_fitted()
        records = score_frames(X, self.manifest_, self._config())
        return np.array([[rec.igo_pqa] for rec in records])

    def score_records(self, X) -> list:
        self._check_fitted()
        return score_frames(X, self.manifest_, self._config())


class PillarTransformerRegressor(BaseEstimator, RegressorMixin):
    """No-reference score regressor with a fit/predict surface."""

    def __init__(self, cell_size=1.0, bev_extent=32.0, pillar_channels=32,
                 embed_dim=64, heads=4, encoder_layers=2, decoder_layers=2,
                 patch_size=8, pos_encoding="sinusoidal", epochs=30,
                 batch_size=8, base_lr=4e-4, max_lr=2e-3, cycle_len=16,
                 weight_decay=0.01, grad_clip=10.0, loss="l1", seed=0):
        self.cell_size = cell_size
        self.bev_extent = bev_extent
        self.pillar_channels = pillar_channels
        self.embed_dim = embed_dim
        self.heads = heads
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers
        self.patch_size = patch_size
        self.pos_encoding = pos_encoding
        self.epochs = epochs
        self.batch_size = batch_size
        self.base_lr = base_lr
        self.max_lr = max_lr
        self.cycle_len = cycle_len
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.loss = loss
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        extent = float(self.bev_extent)
        return ModelConfig(
            x_range=(-extent, extent),
            y_range=(-extent, extent),
            cell_size=self.cell_size,
            pillar_channels=self.pillar_channels,
            embed_dim=self.embed_dim,
            heads=self.heads,
            encoder_layers=self.encoder_layers,
            decoder_layers=self.decoder_layers,
            patch_size=self.patch_size,
            pos_encoding=self.pos_encoding,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            base_lr=self.base_lr,
            max_lr=self.max_lr,
            cycle_len=self.cycle_len,
            weight_decay=self.weight_decay,
            grad_clip=self.grad_clip,
            seed=self.seed,
            loss=self.loss,
        )

    def fit(self, X, y):
        model = ScoreRegressor(self._model_config(), seed=self.seed)
        result = train(model, X, y, self._train_config())
        self.model_ = model
        self.loss_curve_ = list(result.loss_curve)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this PillarTransformerRegressor instance is not fitted yet")
        return predict_many(self.model_, X)
