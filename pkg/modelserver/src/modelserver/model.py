"""Tiny randomly initialized ESM-style masked language model.

The checkpoint is generated deterministically from a seed at startup — this
server exists to exercise the wire protocol and client plumbing, not to make
biologically meaningful predictions. Output logits are remapped from the
model vocabulary to the canonical 20-letter alphabet ordering.
"""

from __future__ import annotations

import torch
from transformers import EsmConfig, EsmForMaskedLM

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"

_SPECIALS = ["<cls>", "<pad>", "<eos>", "<mask>"]
VOCAB = _SPECIALS + list(ALPHABET)
CLS_ID, PAD_ID, EOS_ID, MASK_ID = range(4)
AA_IDS = list(range(len(_SPECIALS), len(VOCAB)))  # vocab ids in alphabet order


class TinyMaskedLm:
    """Deterministic wrapper around a freshly initialized EsmForMaskedLM."""

    def __init__(self, seed: int = 0, max_length: int = 256,
                 hidden_size: int = 32, num_layers: int = 2, num_heads: int = 4):
        torch.manual_seed(seed)
        config = EsmConfig(
            vocab_size=len(VOCAB),
            hidden_size=hidden_size,
            num_hidden_layers=num_layers,
            num_attention_heads=num_heads,
            intermediate_size=hidden_size * 2,
            max_position_embeddings=max_length + 2,
            pad_token_id=PAD_ID,
            mask_token_id=MASK_ID,
            position_embedding_type="absolute",
        )
        self.max_length = max_length
        self.model = EsmForMaskedLM(config).eval()
        self._aa_ids = torch.tensor(AA_IDS)

    def _encode(self, sequence: str, masked_positions: set[int]) -> torch.Tensor:
        ids = [CLS_ID]
        for i, aa in enumerate(sequence):
            ids.append(MASK_ID if i in masked_positions else VOCAB.index(aa))
        ids.append(EOS_ID)
        return torch.tensor([ids])

    @torch.no_grad()
    def logits(self, sequence: str, masked_positions: list[int],
               report_positions: list[int]) -> list[list[float]]:
        """Rows of 20 logits (alphabet order) at `report_positions`, sorted."""
        input_ids = self._encode(sequence, set(masked_positions))
        out = self.model(input_ids=input_ids).logits[0]  # (L+2, vocab)
        rows = []
        for p in sorted(set(report_positions)):
            row = out[p + 1].index_select(0, self._aa_ids)  # skip <cls> offset
            rows.append([float(x) for x in row])
        return rows
