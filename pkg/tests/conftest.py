"""Shared fixtures: a small feature-level classification world on disk."""

import numpy as np
import pytest

from partmap import FeatureMap, LabeledSet, formats


class FeatureWorld:
    """Three-class synthetic features with class-specific direction atoms."""

    def __init__(self, root, seed=101, classes=3, h=4, w=4, channels=9, atoms_per_class=3):
        rng = np.random.default_rng(seed)
        self.root = root
        self.classes = classes
        self.class_names = [f"class{c}" for c in range(classes)]
        # mutually orthogonal atoms: classes can never cross-fire at delta 0.45
        basis, _ = np.linalg.qr(rng.normal(size=(channels, channels)))
        atoms = basis[: classes * atoms_per_class].reshape(classes, atoms_per_class, channels)
        self.atoms = atoms
        self.h, self.w, self.channels = h, w, channels
        self._rng = rng

    def _map_for(self, label):
        rng = self._rng
        atoms = self.atoms[label]
        picks = rng.integers(0, atoms.shape[0], size=(self.h, self.w))
        data = atoms[picks] + rng.normal(scale=0.05, size=(self.h, self.w, self.channels))
        data *= rng.uniform(0.5, 2.0, size=(self.h, self.w, 1))  # scale must not matter
        return data.astype(np.float32)

    def write_labeled(self, stem, per_class):
        maps, ids, labels = [], [], []
        for label in range(self.classes):
            for i in range(per_class):
                source_id = f"{stem}-{label}-{i}"
                maps.append(FeatureMap(data=self._map_for(label), source_id=source_id))
                ids.append(source_id)
                labels.append(label)
        features = self.root / f"{stem}.fmap"
        labels_csv = self.root / f"{stem}-labels.csv"
        formats.write_feature_maps(maps, features)
        formats.write_labels(
            LabeledSet(ids=tuple(ids), labels=tuple(labels), class_names=tuple(self.class_names)),
            labels_csv,
        )
        return features, labels_csv, ids, labels

    def write_background(self, stem, n_maps=4):
        rng = self._rng
        maps = [
            FeatureMap(
                data=rng.normal(size=(self.h, self.w, self.channels)).astype(np.float32),
                source_id=f"bg-{i}",
            )
            for i in range(n_maps)
        ]
        path = self.root / f"{stem}.fmap"
        formats.write_feature_maps(maps, path)
        return path


@pytest.fixture
def feature_world(tmp_path):
    return FeatureWorld(tmp_path)
