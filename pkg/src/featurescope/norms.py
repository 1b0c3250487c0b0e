"""Loading and validation of semantic feature-norm datasets.

A norm dataset is tabular text (comma- or tab-delimited, auto-detected):
the header names the features, the first column holds the word, and every
other cell is a real-valued rating. Ratings live on a per-space scale,
e.g. 0-6 for Binder-style norms. The loaded ``NormSpace`` is immutable and
serves as the target space for projection training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class NormFormatError(ValueError):
    """Raised when a norm file is structurally malformed."""


class NormValidationError(ValueError):
    """Raised when a norm value violates the declared scale bounds."""


@dataclass(frozen=True)
class FeatureDef:
    """A named feature with an optional human-readable definition."""

    name: str
    definition: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("feature name must be non-empty")


@dataclass(frozen=True)
class SpaceConfig:
    """Per-space configuration, loadable from a JSON object.

    ``scale_min``/``scale_max`` of ``None`` means bounds are taken from the
    observed column minima/maxima and bound validation is disabled.
    """

    name: str
    scale_min: float | None = None
    scale_max: float | None = None
    normalize: str = "none"

    @classmethod
    def from_json(cls, path: str | Path) -> "SpaceConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            name=raw["name"],
            scale_min=raw.get("scale_min"),
            scale_max=raw.get("scale_max"),
            normalize=raw.get("normalize", "none"),
        )


@dataclass(frozen=True)
class NormSpace:
    """A named semantic feature space with per-word target vectors.

    ``vocabulary`` maps case-folded words to float64 vectors of length
    ``len(features)``. Instances are immutable after construction; sharing
    across threads needs no synchronization.
    """

    name: str
    features: tuple[FeatureDef, ...]
    vocabulary: dict[str, np.ndarray] = field(repr=False)
    scale_min: float
    scale_max: float

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate feature names in space {self.name!r}")
        n = len(self.features)
        for word, vec in self.vocabulary.items():
            if vec.shape != (n,):
                raise ValueError(
                    f"vector for {word!r} has length {vec.shape}, expected ({n},)"
                )

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def matrix(self, words: list[str] | None = None) -> np.ndarray:
        """Target vectors stacked row-wise, one row per word (sorted order
        unless ``words`` is given)."""
        keys = sorted(self.vocabulary) if words is None else words
        return np.stack([self.vocabulary[w] for w in keys])


def _detect_delimiter(header: str) -> str:
    return "\t" if header.count("\t") > header.count(",") else ","


def load_norms(path: str | Path, config: SpaceConfig | None = None) -> NormSpace:
    """Load a delimited norm file into a validated ``NormSpace``.

    The header row names the features; the first column is the word. Words
    are case-folded on load. When ``config`` supplies scale bounds, every
    value is checked against them; otherwise bounds default to the observed
    column min/max and no bound check is performed.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise NormFormatError(f"{path}: file is empty")

    delim = _detect_delimiter(lines[0])
    header = lines[0].split(delim)
    if len(header) < 2:
        raise NormFormatError(f"{path}: header must name at least one feature")
    features = tuple(FeatureDef(name.strip()) for name in header[1:])
    n_features = len(features)

    vocabulary: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(delim)
        if len(cells) != n_features + 1:
            raise NormFormatError(
                f"{path}:{lineno}: expected {n_features + 1} fields, got {len(cells)}"
            )
        word = cells[0].strip().casefold()
        if not word:
            raise NormFormatError(f"{path}:{lineno}: empty word")
        if word in vocabulary:
            raise NormFormatError(f"{path}:{lineno}: duplicate word {word!r}")
        try:
            values = np.array([float(c) for c in cells[1:]], dtype=np.float64)
        except ValueError as exc:
            raise NormFormatError(f"{path}:{lineno}: {exc}") from None
        vocabulary[word] = values

    if not vocabulary:
        raise NormFormatError(f"{path}: no data rows")

    name = config.name if config is not None else path.stem
    stacked = np.stack(list(vocabulary.values()))
    if config is not None and config.scale_min is not None and config.scale_max is not None:
        lo, hi = float(config.scale_min), float(config.scale_max)
        bad = np.argwhere((stacked < lo) | (stacked > hi))
        if bad.size:
            r, c = bad[0]
            word = list(vocabulary)[r]
            raise NormValidationError(
                f"value {stacked[r, c]} for word {word!r}, feature "
                f"{features[c].name!r} outside scale [{lo}, {hi}]"
            )
    else:
        lo, hi = float(stacked.min()), float(stacked.max())

    for vec in vocabulary.values():
        vec.setflags(write=False)
    return NormSpace(
        name=name, features=features, vocabulary=vocabulary, scale_min=lo, scale_max=hi
    )


def save_norms(space: NormSpace, path: str | Path, delimiter: str = ",") -> None:
    """Serialize a space back to delimited text (word column first).

    Values are written with ``repr`` so a save/load cycle is bit-exact.
    """
    lines = [delimiter.join(["word", *space.feature_names])]
    for word, vec in space.vocabulary.items():
        lines.append(delimiter.join([word, *(repr(float(v)) for v in vec)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def normalize_features(space: NormSpace, mode: str) -> NormSpace:
    """Rescale feature columns.

    ``none`` is the identity. ``minmax_per_feature`` maps each column
    affinely onto [0, 1] and updates the scale bounds accordingly; a
    constant column is an error because the map would be undefined.
    """
    if mode == "none":
        return space
    if mode != "minmax_per_feature":
        raise ValueError(f"unknown normalization mode {mode!r}")

    words = list(space.vocabulary)
    stacked = np.stack([space.vocabulary[w] for w in words])
    col_min = stacked.min(axis=0)
    col_max = stacked.max(axis=0)
    constant = np.flatnonzero(col_max <= col_min)
    if constant.size:
        raise NormValidationError(
            f"feature {space.features[constant[0]].name!r} is constant over the "
            "vocabulary; minmax_per_feature is undefined"
        )
    scaled = (stacked - col_min) / (col_max - col_min)
    vocabulary = {}
    for i, word in enumerate(words):
        vec = scaled[i].copy()
        vec.setflags(write=False)
        vocabulary[word] = vec
    return replace(
        space, vocabulary=vocabulary, scale_min=0.0, scale_max=1.0
    )


def select_features(space: NormSpace, names: list[str]) -> list[int]:
    """Indices of ``names`` within the space's feature list, in request order."""
    index = {f.name: i for i, f in enumerate(space.features)}
    missing = [n for n in names if n not in index]
    if missing:
        raise KeyError(
            f"unknown feature(s) {missing} in space {space.name!r}; "
            f"valid names: {list(index)}"
        )
    return [index[n] for n in names]
