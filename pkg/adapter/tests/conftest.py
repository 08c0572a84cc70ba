import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + list("abcdefghijklmnopqrstuvwxyz0123456789.,()")
    + ["##" + ch for ch in "abcdefghijklmnopqrstuvwxyz0123456789"]
)


def build_checkpoint(directory, labels):
    import torch
    from tokenizers import BertWordPieceTokenizer
    from transformers import BertConfig, BertForTokenClassification, BertTokenizerFast

    directory.mkdir(parents=True, exist_ok=True)
    vocab_path = directory / "vocab.txt"
    vocab_path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    wordpiece = BertWordPieceTokenizer(str(vocab_path), lowercase=True)
    tokenizer = BertTokenizerFast(tokenizer_object=wordpiece)
    id2label = {index: label for index, label in enumerate(labels)}
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
        num_labels=len(labels),
        id2label=id2label,
        label2id={label: index for index, label in id2label.items()},
    )
    torch.manual_seed(7)
    model = BertForTokenClassification(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    from onconer_adapter.core import CANONICAL_TAGS

    return build_checkpoint(tmp_path_factory.mktemp("ckpt"), list(CANONICAL_TAGS))


@pytest.fixture(scope="session")
def wrong_label_checkpoint(tmp_path_factory):
    return build_checkpoint(
        tmp_path_factory.mktemp("ckpt_bad"), ["O", "B-FOO", "I-FOO"]
    )
