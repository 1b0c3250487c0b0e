import os

import pytest
import torch

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "i", "sent", "the", "letter", "to", "london", "dakota",
    "play", "##ing", "dog", "cat", "a", ".",
]


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A miniature randomly initialized bidirectional checkpoint with a
    WordPiece vocabulary small enough to control subword splits exactly."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import BertProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    path = tmp_path_factory.mktemp("tiny-bert")
    vocab = {word: i for i, word in enumerate(VOCAB)}
    tokenizer = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    tokenizer.normalizer = BertNormalizer(lowercase=True)
    tokenizer.pre_tokenizer = BertPreTokenizer()
    tokenizer.post_processor = BertProcessing(
        sep=("[SEP]", vocab["[SEP]"]), cls=("[CLS]", vocab["[CLS]"])
    )
    PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    ).save_pretrained(path)

    config = BertConfig(
        vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=32, max_position_embeddings=64,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_gpt2_dir(tmp_path_factory):
    """Config-only autoregressive checkpoint; refusal happens before any
    weights are needed."""
    from transformers import GPT2Config

    path = tmp_path_factory.mktemp("tiny-gpt2")
    GPT2Config(vocab_size=50, n_embd=16, n_layer=2, n_head=2).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def backend(tiny_bert_dir):
    from fs_extractor.core import ModelBackend

    return ModelBackend(tiny_bert_dir)
