import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featurescope.dative import (
    DativeItem,
    DeltaReport,
    LayerDelta,
    PERSON_FEATURES,
    PLACE_FEATURES,
    StudyLexicon,
    VerbForm,
    compute_deltas,
    default_lexicon,
    emit_figure_data,
    generate_pairs,
    load_lexicon,
)

# Reference per-feature recipient predictions for the two variants
# (DO column and PO column of the case-study table).
TABLE_DO = {"Biomotion": 1.19, "Body": 1.00, "Human": 0.89, "Face": 0.71,
            "Speech": 0.68, "Landmark": 1.83, "Scene": 2.59}
TABLE_PO = {"Biomotion": 0.43, "Body": 0.26, "Human": 0.48, "Face": 0.19,
            "Speech": 0.13, "Landmark": 3.43, "Scene": 4.43}
FEATURES = tuple(TABLE_DO)


def single_lexicon():
    return StudyLexicon(
        recipients=("London",),
        verbs=(VerbForm("send", "sent"),),
        themes={"send": "the letter"},
        agents=("I",),
    )


class TestLexicon:
    def test_default_shape(self):
        lex = default_lexicon()
        assert len(lex.recipients) == 15
        assert len(lex.verbs) == 6
        assert len(lex.agents) == 5
        assert {"London", "Dakota", "Jordan"} <= set(lex.recipients)
        assert [(v.lemma, v.past) for v in lex.verbs] == [
            ("send", "sent"), ("mail", "mailed"), ("order", "ordered"),
            ("bring", "brought"), ("fax", "faxed"), ("deliver", "delivered"),
        ]
        assert lex.expected_pair_count == 450

    def test_missing_theme_rejected(self):
        with pytest.raises(ValueError, match="no theme"):
            StudyLexicon(
                recipients=("London",),
                verbs=(VerbForm("send", "sent"),),
                themes={},
                agents=("I",),
            )

    def test_load_from_file(self, tmp_path):
        doc = {
            "recipients": ["London"],
            "verbs": [{"lemma": "send", "past": "sent"}],
            "themes": {"send": "the letter"},
            "agents": ["I"],
        }
        path = tmp_path / "lexicon.json"
        path.write_text(json.dumps(doc))
        lex = load_lexicon(path)
        assert lex == single_lexicon()


class TestGeneratePairs:
    def test_default_lexicon_yields_450(self):
        items = generate_pairs(default_lexicon())
        assert len(items) == 450

    def test_singleton_product(self):
        (item,) = generate_pairs(single_lexicon())
        assert item.do_sentence == "I sent London the letter."
        assert item.po_sentence == "I sent the letter to London."

    def test_attested_example_in_default_lexicon(self):
        items = generate_pairs(default_lexicon())
        match = [
            i for i in items
            if (i.agent, i.verb_past, i.recipient) == ("I", "sent", "London")
        ]
        assert len(match) == 1
        assert match[0].do_sentence == "I sent London the letter."
        assert match[0].po_sentence == "I sent the letter to London."

    def test_order_recipient_major(self):
        lex = StudyLexicon(
            recipients=("London", "Dakota"),
            verbs=(VerbForm("send", "sent"), VerbForm("mail", "mailed")),
            themes={"send": "the letter", "mail": "the package"},
            agents=("Maria", "Sam"),
        )
        items = generate_pairs(lex)
        key = [(i.recipient, i.verb_past, i.agent) for i in items]
        assert key == [
            ("London", "sent", "Maria"), ("London", "sent", "Sam"),
            ("London", "mailed", "Maria"), ("London", "mailed", "Sam"),
            ("Dakota", "sent", "Maria"), ("Dakota", "sent", "Sam"),
            ("Dakota", "mailed", "Maria"), ("Dakota", "mailed", "Sam"),
        ]

    def test_pair_count_formula(self):
        lex = StudyLexicon(
            recipients=("A1", "B2", "C3"),
            verbs=(VerbForm("send", "sent"),),
            themes={"send": "the letter"},
            agents=("X", "Y"),
        )
        assert len(generate_pairs(lex)) == 3 * 1 * 2 == lex.expected_pair_count

    def test_recipient_exactly_once_and_po_to(self):
        for item in generate_pairs(default_lexicon()):
            for sentence in (item.do_sentence, item.po_sentence):
                tokens = [t.strip(".").casefold() for t in sentence.split()]
                assert tokens.count(item.recipient.casefold()) == 1
            assert f" to {item.recipient}." in item.po_sentence

    def test_sentences_capitalized_and_terminated(self):
        for item in generate_pairs(default_lexicon())[:20]:
            for sentence in (item.do_sentence, item.po_sentence):
                assert sentence[0].isupper()
                assert sentence.endswith(".")

    def test_agent_colliding_with_recipient_rejected(self):
        lex = StudyLexicon(
            recipients=("London",),
            verbs=(VerbForm("send", "sent"),),
            themes={"send": "the letter"},
            agents=("London",),
        )
        with pytest.raises(ValueError, match="occurs 2 times"):
            generate_pairs(lex)


def table_projections(items, layer=8):
    do_vec = np.array([TABLE_DO[f] for f in FEATURES])
    po_vec = np.array([TABLE_PO[f] for f in FEATURES])
    projections = {}
    for item in items:
        projections[(item, "do", layer)] = do_vec
        projections[(item, "po", layer)] = po_vec
    return projections


class TestComputeDeltas:
    def test_reference_table_arithmetic(self):
        # person: ((1.19-0.43)+(1.00-0.26)+(0.89-0.48)+(0.71-0.19)+(0.68-0.13))/5
        # place:  ((3.43-1.83)+(4.43-2.59))/2
        items = generate_pairs(single_lexicon())
        projections = table_projections(items)
        person_idx = [FEATURES.index(f) for f in PERSON_FEATURES]
        place_idx = [FEATURES.index(f) for f in PLACE_FEATURES]
        report = compute_deltas(items, projections, person_idx, place_idx, [8])
        (delta,) = report.deltas
        assert delta.person_delta == pytest.approx(0.596, abs=1e-9)
        assert delta.place_delta == pytest.approx(1.72, abs=1e-9)
        assert delta.n_items == 1

    def test_identical_projections_give_zero(self):
        items = generate_pairs(single_lexicon())
        vec = np.arange(7, dtype=float)
        projections = {
            (items[0], "do", 0): vec,
            (items[0], "po", 0): vec,
        }
        report = compute_deltas(items, projections, [0, 1], [2], [0])
        assert report.deltas[0].person_delta == 0.0
        assert report.deltas[0].place_delta == 0.0

    def test_matches_triple_loop_oracle(self):
        # Oracle: explicit loops over items, member features, and layers.
        rng = np.random.default_rng(19)
        lex = StudyLexicon(
            recipients=tuple(f"R{i}x" for i in range(5)),
            verbs=(VerbForm("send", "sent"), VerbForm("mail", "mailed")),
            themes={"send": "the letter", "mail": "the package"},
            agents=("Maria",),
        )
        items = generate_pairs(lex)
        layers = [0, 1, 2]
        n_features = 6
        projections = {
            (item, variant, layer): rng.normal(size=n_features)
            for item in items for variant in ("do", "po") for layer in layers
        }
        person_idx, place_idx = [0, 3, 4], [1, 5]
        report = compute_deltas(items, projections, person_idx, place_idx, layers)

        for li, layer in enumerate(layers):
            person_total, place_total = 0.0, 0.0
            for item in items:
                for f in person_idx:
                    person_total += (
                        projections[(item, "do", layer)][f]
                        - projections[(item, "po", layer)][f]
                    )
                for f in place_idx:
                    place_total += (
                        projections[(item, "po", layer)][f]
                        - projections[(item, "do", layer)][f]
                    )
            expected_person = person_total / (len(items) * len(person_idx))
            expected_place = place_total / (len(items) * len(place_idx))
            assert report.deltas[li].person_delta == pytest.approx(
                expected_person, abs=1e-10
            )
            assert report.deltas[li].place_delta == pytest.approx(
                expected_place, abs=1e-10
            )

    def test_swapping_variants_negates_deltas(self):
        rng = np.random.default_rng(29)
        items = generate_pairs(single_lexicon())
        projections = {}
        swapped = {}
        for item in items:
            do_vec, po_vec = rng.normal(size=7), rng.normal(size=7)
            projections[(item, "do", 0)] = do_vec
            projections[(item, "po", 0)] = po_vec
            swapped[(item, "do", 0)] = po_vec
            swapped[(item, "po", 0)] = do_vec
        forward = compute_deltas(items, projections, [0, 1], [5, 6], [0])
        backward = compute_deltas(items, swapped, [0, 1], [5, 6], [0])
        assert backward.deltas[0].person_delta == -forward.deltas[0].person_delta
        assert backward.deltas[0].place_delta == -forward.deltas[0].place_delta

    @given(st.floats(-5, 5, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_constant_shift_invariance(self, shift):
        rng = np.random.default_rng(31)
        items = generate_pairs(single_lexicon())
        base, shifted = {}, {}
        for item in items:
            for variant in ("do", "po"):
                vec = rng.normal(size=7)
                base[(item, variant, 0)] = vec
                shifted[(item, variant, 0)] = vec + shift
        a = compute_deltas(items, base, [0, 1, 2], [5, 6], [0])
        b = compute_deltas(items, shifted, [0, 1, 2], [5, 6], [0])
        assert b.deltas[0].person_delta == pytest.approx(
            a.deltas[0].person_delta, abs=1e-9
        )
        assert b.deltas[0].place_delta == pytest.approx(
            a.deltas[0].place_delta, abs=1e-9
        )

    def test_missing_projection_names_item(self):
        items = generate_pairs(single_lexicon())
        with pytest.raises(KeyError, match="London"):
            compute_deltas(items, {}, [0], [1], [0])

    def test_empty_index_lists_rejected(self):
        items = generate_pairs(single_lexicon())
        with pytest.raises(ValueError, match="non-empty"):
            compute_deltas(items, table_projections(items), [], [1], [8])


class TestEmitFigureData:
    def _report(self, model, layers):
        return DeltaReport(
            model=model,
            deltas=tuple(
                LayerDelta(layer=k, person_delta=0.1 * k, place_delta=-0.2 * k,
                           n_items=450)
                for k in layers
            ),
        )

    def test_twelve_layers_give_24_rows(self, tmp_path):
        path = tmp_path / "deltas.csv"
        emit_figure_data([self._report("bert", range(12))], path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 24

    def test_sign_convention_columns(self, tmp_path):
        items = generate_pairs(single_lexicon())
        projections = table_projections(items, layer=8)
        person_idx = [FEATURES.index(f) for f in PERSON_FEATURES]
        place_idx = [FEATURES.index(f) for f in PLACE_FEATURES]
        report = compute_deltas(
            items, projections, person_idx, place_idx, [8], model="bert"
        )
        path = tmp_path / "deltas.csv"
        emit_figure_data([report], path)
        with open(path, newline="") as fh:
            rows = {r["feature_set"]: r for r in csv.DictReader(fh)}
        # person rows carry DO - PO, place rows PO - DO: both positive here
        assert float(rows["person"]["delta"]) == pytest.approx(0.596, abs=1e-9)
        assert float(rows["place"]["delta"]) == pytest.approx(1.72, abs=1e-9)

    def test_empty_reports_header_only(self, tmp_path):
        path = tmp_path / "deltas.csv"
        emit_figure_data([], path)
        lines = path.read_text().splitlines()
        assert lines == ["model,layer,feature_set,delta,n_items"]
