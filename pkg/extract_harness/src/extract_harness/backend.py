"""Model backend: sampling plus last-prompt-token hidden states.

Built on transformers causal LMs.  Hidden states are taken at the final
prompt token before any decoding, one vector per transformer layer
(the embedding output is not a layer and is skipped).
"""

from __future__ import annotations

import numpy as np
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


class GenerationFailure(RuntimeError):
    pass


class TransformersBackend:
    def __init__(self, model_path: str, max_new_tokens: int = 32):
        self.model_path = model_path
        self.max_new_tokens = max_new_tokens
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForCausalLM.from_pretrained(model_path)
        self.model.eval()
        if self.tokenizer.pad_token_id is None:
            self.tokenizer.pad_token = self.tokenizer.eos_token

    @property
    def num_layers(self) -> int:
        return int(self.model.config.num_hidden_layers)

    @property
    def hidden_dim(self) -> int:
        return int(self.model.config.hidden_size)

    def _encode(self, prompt: str) -> torch.Tensor:
        return self.tokenizer(prompt, return_tensors="pt").input_ids

    def hidden_states(self, prompt: str) -> np.ndarray:
        """(num_layers, hidden_dim) float32 at the last prompt token."""
        ids = self._encode(prompt)
        with torch.no_grad():
            out = self.model(ids, output_hidden_states=True)
        layers = out.hidden_states[1:]
        stacked = torch.stack([layer[0, -1, :] for layer in layers])
        return stacked.to(torch.float32).cpu().numpy()

    def sample_paths(self, prompt: str, n: int, top_k: int, top_p: float,
                     temperature: float, seed: int) -> list[str]:
        """n sampled continuations, deterministic per seed on CPU."""
        ids = self._encode(prompt)
        torch.manual_seed(seed)
        try:
            with torch.no_grad():
                out = self.model.generate(
                    ids,
                    do_sample=True,
                    top_k=top_k,
                    top_p=top_p,
                    temperature=temperature,
                    max_new_tokens=self.max_new_tokens,
                    num_return_sequences=n,
                    pad_token_id=self.tokenizer.pad_token_id,
                )
        except Exception as exc:
            raise GenerationFailure(str(exc)) from exc
        prompt_len = ids.shape[1]
        return [
            self.tokenizer.decode(seq[prompt_len:], skip_special_tokens=True)
            for seq in out
        ]
