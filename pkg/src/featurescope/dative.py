"""Dative-alternation probe: sentence-pair generation and feature deltas.

Each item pairs a double-object sentence ("[agent] [verb-past] [recipient]
[theme].") with its prepositional-object alternant ("[agent] [verb-past]
[theme] to [recipient]."). Projecting the recipient's embedding from both
variants into a feature space and averaging the per-feature differences
yields a per-layer measure of how much more person-like the recipient
reads in the DO and how much more place-like in the PO.

Person-hood features (Binder): Biomotion, Body, Human, Face, Speech.
Place-hood features: Landmark, Scene.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

PERSON_FEATURES = ("Biomotion", "Body", "Human", "Face", "Speech")
PLACE_FEATURES = ("Landmark", "Scene")

VARIANTS = ("do", "po")


@dataclass(frozen=True)
class VerbForm:
    lemma: str
    past: str


@dataclass(frozen=True)
class StudyLexicon:
    recipients: tuple[str, ...]
    verbs: tuple[VerbForm, ...]
    themes: Mapping[str, str]
    agents: tuple[str, ...]

    def __post_init__(self) -> None:
        for group, label in ((self.recipients, "recipient"), (self.agents, "agent")):
            if not group or any(not s for s in group):
                raise ValueError(f"every {label} must be a non-empty string")
        for verb in self.verbs:
            if not verb.lemma or not verb.past:
                raise ValueError("verb lemma and past form must be non-empty")
            if verb.lemma not in self.themes:
                raise ValueError(f"no theme for verb {verb.lemma!r}")
            if not self.themes[verb.lemma]:
                raise ValueError(f"empty theme for verb {verb.lemma!r}")

    @property
    def expected_pair_count(self) -> int:
        return len(self.recipients) * len(self.verbs) * len(self.agents)


def load_lexicon(path: str | Path) -> StudyLexicon:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return _lexicon_from_dict(raw)


def default_lexicon() -> StudyLexicon:
    raw = json.loads(
        resources.files("featurescope").joinpath("data/lexicon.json").read_text("utf-8")
    )
    return _lexicon_from_dict(raw)


def _lexicon_from_dict(raw: dict) -> StudyLexicon:
    return StudyLexicon(
        recipients=tuple(raw["recipients"]),
        verbs=tuple(VerbForm(v["lemma"], v["past"]) for v in raw["verbs"]),
        themes=dict(raw["themes"]),
        agents=tuple(raw["agents"]),
    )


@dataclass(frozen=True)
class DativeItem:
    agent: str
    verb_past: str
    theme: str
    recipient: str
    do_sentence: str
    po_sentence: str
    recipient_occurrence: int = 0


def _capitalize(sentence: str) -> str:
    return sentence[0].upper() + sentence[1:]


def _count_token(sentence: str, word: str) -> int:
    target = word.casefold()
    return sum(
        1 for tok in sentence.split() if tok.strip(".,!?;:").casefold() == target
    )


def generate_pairs(lexicon: StudyLexicon) -> list[DativeItem]:
    """Full Cartesian product of recipients x verbs x agents.

    Order is deterministic: recipient-major, then verb, then agent. The
    theme is fixed per verb. Sentences are capitalized and period-
    terminated, and the recipient must surface exactly once in each
    variant (an overlapping agent/theme would silently corrupt the probe,
    so that is rejected here).
    """
    items = []
    for recipient in lexicon.recipients:
        for verb in lexicon.verbs:
            theme = lexicon.themes[verb.lemma]
            for agent in lexicon.agents:
                do = _capitalize(f"{agent} {verb.past} {recipient} {theme}.")
                po = _capitalize(f"{agent} {verb.past} {theme} to {recipient}.")
                for sentence in (do, po):
                    n = _count_token(sentence, recipient)
                    if n != 1:
                        raise ValueError(
                            f"recipient {recipient!r} occurs {n} times in {sentence!r}"
                        )
                items.append(
                    DativeItem(
                        agent=agent,
                        verb_past=verb.past,
                        theme=theme,
                        recipient=recipient,
                        do_sentence=do,
                        po_sentence=po,
                    )
                )
    return items


@dataclass(frozen=True)
class LayerDelta:
    layer: int
    person_delta: float
    place_delta: float
    n_items: int


@dataclass(frozen=True)
class DeltaReport:
    model: str
    deltas: tuple[LayerDelta, ...]


ProjectionMap = Mapping[tuple[DativeItem, str, int], np.ndarray]


def compute_deltas(
    items: list[DativeItem],
    projections: ProjectionMap,
    person_idx: list[int],
    place_idx: list[int],
    layers: list[int],
    model: str = "model",
) -> DeltaReport:
    """Average feature shifts between the two variants, per layer.

    person_delta = mean over items and person features of DO - PO;
    place_delta  = mean over items and place features of PO - DO.
    Values stay on the norm scale (differences of predicted ratings).
    """
    if not person_idx or not place_idx:
        raise ValueError("person_idx and place_idx must be non-empty")
    if not items:
        raise ValueError("no items to average over")
    person = np.asarray(person_idx, dtype=int)
    place = np.asarray(place_idx, dtype=int)
    deltas = []
    for layer in layers:
        person_sum = 0.0
        place_sum = 0.0
        for item in items:
            try:
                do_vec = np.asarray(projections[(item, "do", layer)], dtype=np.float64)
                po_vec = np.asarray(projections[(item, "po", layer)], dtype=np.float64)
            except KeyError as exc:
                raise KeyError(
                    f"missing projection at layer {layer} for item "
                    f"({item.agent!r}, {item.verb_past!r}, {item.recipient!r}): {exc}"
                ) from None
            person_sum += float(np.sum(do_vec[person] - po_vec[person]))
            place_sum += float(np.sum(po_vec[place] - do_vec[place]))
        n = len(items)
        deltas.append(
            LayerDelta(
                layer=layer,
                person_delta=person_sum / (n * len(person)),
                place_delta=place_sum / (n * len(place)),
                n_items=n,
            )
        )
    return DeltaReport(model=model, deltas=tuple(deltas))


def emit_figure_data(reports: list[DeltaReport], path: str | Path) -> None:
    """Write one CSV row per (model, layer, feature_set) mean delta.

    Sign convention: person rows carry DO - PO, place rows PO - DO, so
    positive values mean "more person-like in the DO" and "more place-like
    in the PO" respectively.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "layer", "feature_set", "delta", "n_items"])
        for report in reports:
            for layer_delta in report.deltas:
                writer.writerow(
                    [report.model, layer_delta.layer, "person",
                     repr(layer_delta.person_delta), layer_delta.n_items]
                )
                writer.writerow(
                    [report.model, layer_delta.layer, "place",
                     repr(layer_delta.place_delta), layer_delta.n_items]
                )
