"""Contextual word embeddings from masked language models.

A word occurrence is located by whitespace tokenization (surrounding
punctuation ignored, case-insensitive), aligned to model subword tokens
through the tokenizer's character offset mapping, and embedded as the
hidden state of the requested layer. Multi-subword words are mean-pooled;
layer 0 is the pre-transformer embedding output.

Autoregressive models are refused outright: their representations only
carry left context, which defeats word-in-context probing.
"""

from __future__ import annotations

import json
import re
import string
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import torch
from transformers import AutoConfig, AutoModel, AutoTokenizer

# model_type values of common causal-only families
CAUSAL_MODEL_TYPES = {
    "bloom", "codegen", "ctrl", "falcon", "gemma", "gpt2", "gpt_bigcode",
    "gpt_neo", "gpt_neox", "gptj", "llama", "mistral", "mixtral", "openai-gpt",
    "opt", "phi", "qwen2", "transfo-xl", "xglm",
}

_WORD_RE = re.compile(r"\S+")
_STRIP_CHARS = string.punctuation + "‘’“”"


class AutoregressiveModelError(ValueError):
    """Raised when a causal LM is offered as an embedding source."""


class WordNotFoundError(ValueError):
    """The word (at the requested occurrence) is not in the sentence."""


class LayerOutOfRangeError(ValueError):
    pass


def is_autoregressive(config) -> bool:
    if getattr(config, "is_decoder", False):
        return True
    if config.model_type in CAUSAL_MODEL_TYPES:
        return True
    architectures = getattr(config, "architectures", None) or []
    return any(
        arch.endswith("ForCausalLM") or arch.endswith("LMHeadModel")
        for arch in architectures
    )


@dataclass(frozen=True)
class WordSpan:
    text: str
    start: int
    end: int


def word_spans(sentence: str) -> list[WordSpan]:
    """Whitespace tokens as character spans, surrounding punctuation shaved."""
    spans = []
    for match in _WORD_RE.finditer(sentence):
        token = match.group()
        stripped = token.strip(_STRIP_CHARS)
        if not stripped:
            continue
        start = match.start() + (len(token) - len(token.lstrip(_STRIP_CHARS)))
        spans.append(WordSpan(text=stripped, start=start, end=start + len(stripped)))
    return spans


def locate_word(sentence: str, word: str, occurrence: int) -> WordSpan:
    if occurrence < 0:
        raise WordNotFoundError(f"occurrence must be >= 0, got {occurrence}")
    target = word.casefold()
    matches = [s for s in word_spans(sentence) if s.text.casefold() == target]
    if occurrence >= len(matches):
        raise WordNotFoundError(
            f"word {word!r} occurs {len(matches)} times in the sentence, "
            f"occurrence {occurrence} requested"
        )
    return matches[occurrence]


class ModelBackend:
    """One loaded masked LM plus tokenizer.

    Inference is serialized with a lock: one request at a time per model.
    """

    def __init__(self, name_or_path: str):
        config = AutoConfig.from_pretrained(name_or_path)
        if is_autoregressive(config):
            raise AutoregressiveModelError(
                f"{name_or_path!r} is an autoregressive LM; its embeddings only "
                "capture left context, so it cannot serve as an embedding source. "
                "Use a bidirectional/masked LM instead."
            )
        self.name = str(name_or_path)
        self.tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        self.model = AutoModel.from_pretrained(name_or_path).eval()
        self._lock = threading.Lock()

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    @property
    def num_layers(self) -> int:
        """Transformer layer count; valid layer indices are 0..num_layers."""
        return int(self.model.config.num_hidden_layers)

    def _hidden_states(self, sentence: str):
        encoding = self.tokenizer(
            sentence,
            return_offsets_mapping=True,
            return_special_tokens_mask=True,
            return_tensors="pt",
            truncation=True,
        )
        with self._lock, torch.no_grad():
            output = self.model(
                input_ids=encoding["input_ids"],
                attention_mask=encoding["attention_mask"],
                output_hidden_states=True,
            )
        return encoding, output.hidden_states

    def _check_layer(self, layer: int) -> None:
        if not 0 <= layer <= self.num_layers:
            raise LayerOutOfRangeError(
                f"layer {layer} out of range [0, {self.num_layers}] for {self.name}"
            )

    @staticmethod
    def _token_indices(encoding, span: WordSpan) -> list[int]:
        offsets = encoding["offset_mapping"][0].tolist()
        special = encoding["special_tokens_mask"][0].tolist()
        indices = [
            i
            for i, ((tok_start, tok_end), is_special) in enumerate(zip(offsets, special))
            if not is_special and tok_start < span.end and tok_end > span.start
        ]
        if not indices:
            raise WordNotFoundError(
                f"no model tokens overlap {span.text!r} (sentence truncated?)"
            )
        return indices

    def embed_word(
        self, sentence: str, word: str, occurrence: int, layer: int
    ) -> np.ndarray:
        """Hidden state of the word's tokens at ``layer``; subword vectors
        are mean-pooled."""
        self._check_layer(layer)
        span = locate_word(sentence, word, occurrence)
        encoding, hidden_states = self._hidden_states(sentence)
        indices = self._token_indices(encoding, span)
        vectors = hidden_states[layer][0, indices, :]
        return vectors.mean(dim=0).numpy().astype(np.float64)

    def sentence_records(
        self, sentence: str, context_id: str, layers: Iterable[int]
    ) -> Iterator[dict]:
        """Ingestion-format records for every word occurrence in a sentence."""
        layers = list(layers)
        for layer in layers:
            self._check_layer(layer)
        spans = word_spans(sentence)
        if not spans:
            return
        encoding, hidden_states = self._hidden_states(sentence)
        for span in spans:
            indices = self._token_indices(encoding, span)
            for layer in layers:
                vector = hidden_states[layer][0, indices, :].mean(dim=0)
                yield {
                    "word": span.text.casefold(),
                    "context_id": context_id,
                    "layer": layer,
                    "vector": [float(x) for x in vector],
                }


def extract_corpus(
    corpus_path: str | Path,
    backend: ModelBackend,
    layers: list[int],
    output_path: str | Path,
) -> int:
    """Embed every word of a newline-delimited corpus into ingestion JSONL.

    One context per line; context_id is the zero-based line number. Returns
    the number of records written.
    """
    count = 0
    with open(corpus_path, encoding="utf-8") as src, open(
        output_path, "w", encoding="utf-8"
    ) as dst:
        for line_no, line in enumerate(src):
            sentence = line.strip()
            if not sentence:
                continue
            for record in backend.sentence_records(sentence, str(line_no), layers):
                dst.write(json.dumps(record, sort_keys=True) + "\n")
                count += 1
    return count
