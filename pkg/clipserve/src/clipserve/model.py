"""Frozen text-image model backends.

Two backends behind one interface:

* a pretrained CLIP checkpoint loaded through transformers (the real judge);
* ``tiny`` — a CLIP-shaped model with seeded random weights and a byte-level
  tokenizer, built purely from a config.  It knows nothing about images but
  exercises the full scoring/gradient path, which is what the protocol and
  gradient tests need in environments without model downloads.

All weights are frozen; only the submitted pixels ever carry gradients.
"""

from __future__ import annotations

import threading

import torch
from transformers import CLIPConfig, CLIPModel, CLIPTextConfig, CLIPTokenizer, CLIPVisionConfig

DEFAULT_MODEL = "openai/clip-vit-base-patch32"

# standard CLIP preprocessing statistics
IMAGE_MEAN = (0.48145466, 0.4578275, 0.40821073)
IMAGE_STD = (0.26862954, 0.26130258, 0.27577711)

_TINY_BOS = 256
_TINY_EOS = 257


def _tiny_config() -> CLIPConfig:
    text = CLIPTextConfig(
        vocab_size=258,
        hidden_size=64,
        intermediate_size=128,
        num_hidden_layers=2,
        num_attention_heads=2,
        max_position_embeddings=77,
        bos_token_id=_TINY_BOS,
        eos_token_id=_TINY_EOS,
    )
    vision = CLIPVisionConfig(
        image_size=224,
        patch_size=32,
        hidden_size=64,
        intermediate_size=128,
        num_hidden_layers=2,
        num_attention_heads=2,
    )
    return CLIPConfig(text_config=text.to_dict(), vision_config=vision.to_dict(),
                      projection_dim=64)


def _tiny_tokenize(prompt: str, max_len: int = 77) -> torch.Tensor:
    """Byte-level ids: [bos] utf-8 bytes [eos], truncated to the text width."""
    payload = list(prompt.encode("utf-8"))[: max_len - 2]
    ids = [_TINY_BOS] + payload + [_TINY_EOS]
    return torch.tensor([ids], dtype=torch.long)


def _as_features(output) -> torch.Tensor:
    """get_*_features returns a tensor (transformers 4.x) or a pooled output (5.x)."""
    if torch.is_tensor(output):
        return output
    return output.pooler_output


class JudgeModel:
    """Loaded scorer: cached text embeddings plus batched image embeddings."""

    def __init__(self, model_id: str = DEFAULT_MODEL, device: str = "cpu",
                 dtype: torch.dtype = torch.float32):
        self.model_id = model_id
        self.device = torch.device(device)
        self.dtype = dtype
        if model_id == "tiny":
            torch.manual_seed(0)  # pin the random weights
            self.model = CLIPModel(_tiny_config())
            self.tokenizer = None
        else:
            self.model = CLIPModel.from_pretrained(model_id)
            self.tokenizer = CLIPTokenizer.from_pretrained(model_id)
        self.model.to(self.device, dtype=self.dtype)
        self.model.eval()
        for param in self.model.parameters():
            param.requires_grad_(False)
        self._text_cache: dict[str, torch.Tensor] = {}
        self._lock = threading.Lock()
        self.text_forward_count = 0
        mean = torch.tensor(IMAGE_MEAN, device=self.device, dtype=self.dtype)
        std = torch.tensor(IMAGE_STD, device=self.device, dtype=self.dtype)
        self.image_mean = mean.view(1, 3, 1, 1)
        self.image_std = std.view(1, 3, 1, 1)

    def text_embedding(self, prompt: str) -> torch.Tensor:
        """Normalized text embedding, computed once per distinct prompt."""
        with self._lock:
            cached = self._text_cache.get(prompt)
        if cached is not None:
            return cached
        if self.tokenizer is not None:
            ids = self.tokenizer(prompt, return_tensors="pt", padding=True,
                                 truncation=True)["input_ids"].to(self.device)
        else:
            ids = _tiny_tokenize(prompt).to(self.device)
        with torch.no_grad():
            features = _as_features(self.model.get_text_features(input_ids=ids))
        self.text_forward_count += 1
        embedding = (features / features.norm(dim=-1, keepdim=True)).squeeze(0)
        with self._lock:
            self._text_cache[prompt] = embedding
        return embedding

    def image_embeddings(self, batch: torch.Tensor) -> torch.Tensor:
        """Normalized embeddings of a (k, 3, 224, 224) batch in [0, 1].

        Differentiable with respect to the batch; applies the model's pixel
        normalization internally.
        """
        normalized = (batch - self.image_mean) / self.image_std
        features = _as_features(self.model.get_image_features(pixel_values=normalized))
        return features / features.norm(dim=-1, keepdim=True)
