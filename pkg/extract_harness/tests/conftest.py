from __future__ import annotations

import json

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

VOCAB_WORDS = [
    "<pad>", "<unk>", "the", "answer", "is", "so", "we", "get", "thus",
    "\\boxed{42}", "\\boxed{41}", "\\boxed{7}", "\\boxed{-3}", "\\boxed{2.50}",
    "therefore", "final", ":", "compute", "2", "+", "40", ".", "sum", "of",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small open causal LM saved locally: random GPT-2 with a word vocab."""
    target = tmp_path_factory.mktemp("tiny-model")
    vocab = {w: i for i, w in enumerate(VOCAB_WORDS)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="<unk>",
                                   pad_token="<pad>")
    fast.save_pretrained(target)
    torch.manual_seed(1234)
    config = GPT2Config(vocab_size=len(vocab), n_positions=64, n_embd=32,
                        n_layer=2, n_head=2, bos_token_id=0, eos_token_id=0)
    GPT2LMHeadModel(config).save_pretrained(target)
    return str(target)


@pytest.fixture()
def questions_file(tmp_path):
    path = tmp_path / "questions.jsonl"
    rows = [
        {"question_id": "q-add", "prompt": "compute 2 + 40 : the answer is",
         "gold": "42"},
        {"question_id": "q-seven", "prompt": "the final answer is", "gold": "7"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return str(path)
