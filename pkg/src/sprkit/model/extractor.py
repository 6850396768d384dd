"""Frozen feature extraction: a seeded orthonormal-row linear projection.

Stands in for a pretrained backbone at desk scale. Each panorama is
flattened, normalized to unit RMS (so feature magnitudes are insensitive
to landmark density), and projected to d_model. Weights are fixed at
construction and never trained.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from ..rng import generator
from ..worldsim.render import Observation


class FeatureExtractor:
    """Deterministic map from (Hp, Wp, F) observations to d_model vectors."""

    def __init__(self, input_shape: tuple[int, int, int], d_model: int, seed: int):
        self.input_shape = tuple(input_shape)
        self.d_model = d_model
        input_dim = int(np.prod(input_shape))
        if d_model > input_dim:
            raise ContractError(
                f"d_model {d_model} exceeds flattened input size {input_dim}")
        rng = generator(seed, "extractor")
        raw = rng.normal(size=(input_dim, d_model))
        q, _ = np.linalg.qr(raw)
        self.weight = q.T.copy()               # (d_model, input_dim), orthonormal rows
        self.weight.setflags(write=False)

    def __call__(self, obs) -> np.ndarray:
        return self.extract_sequence([obs])[0]

    def extract_sequence(self, observations) -> np.ndarray:
        """Features (q, d_model) for a sequence of same-shaped observations."""
        flat = []
        for obs in observations:
            pano = obs.pano if isinstance(obs, Observation) else np.asarray(obs)
            if pano.shape != self.input_shape:
                raise DimensionError(
                    f"observation shape {pano.shape} != extractor input "
                    f"{self.input_shape}")
            flat.append(pano.reshape(-1))
        x = np.stack(flat)
        rms = np.sqrt(np.mean(x * x, axis=1, keepdims=True))
        x = np.where(rms > 1e-12, x / np.maximum(rms, 1e-300), 0.0)
        return x @ self.weight.T


def extract_features(extractor: FeatureExtractor, observations) -> np.ndarray:
    return extractor.extract_sequence(observations)
