"""Real-checkpoint inference: tokenize with offsets, window long inputs,
softmax the logits and reorder them into the canonical tag ordering.

torch and transformers are imported lazily so mock mode stays free of
them.
"""

from __future__ import annotations

from .core import CANONICAL_TAGS, AdapterConfig, AdapterError, CorpusDocument


class CheckpointRunner:
    def __init__(self, config: AdapterConfig):
        try:
            import torch
            from transformers import AutoModelForTokenClassification, AutoTokenizer
        except ImportError as exc:
            raise AdapterError(
                "running a checkpoint needs torch and transformers installed"
            ) from exc
        self._torch = torch
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        if not getattr(self.tokenizer, "is_fast", False):
            raise AdapterError(
                "the checkpoint tokenizer does not expose character offsets; "
                "a fast tokenizer is required"
            )
        self.model = AutoModelForTokenClassification.from_pretrained(config.model)
        self.model.eval()

        label_to_index = {
            label: index for index, label in self.model.config.id2label.items()
        }
        missing = [tag for tag in CANONICAL_TAGS if tag not in label_to_index]
        if missing:
            raise AdapterError(
                "checkpoint label map does not cover the canonical tags; "
                "missing: " + ", ".join(missing)
            )
        self._canonical_columns = [label_to_index[tag] for tag in CANONICAL_TAGS]

    def _windows(self, count: int) -> list[tuple[int, int]]:
        """Content-token windows of at most max_len - 2, overlapping by stride."""
        width = self.config.max_len - 2  # room for the two special tokens
        if count <= width:
            return [(0, count)]
        if self.config.stride >= width:
            raise AdapterError(
                f"stride ({self.config.stride}) leaves no forward progress for "
                f"windows of {width} content tokens (max-len {self.config.max_len} "
                f"minus the two special tokens)"
            )
        step = width - self.config.stride
        windows = []
        start = 0
        while True:
            end = min(start + width, count)
            windows.append((start, end))
            if end == count:
                return windows
            start += step

    def predict_document(self, document: CorpusDocument) -> list[dict]:
        torch = self._torch
        encoding = self.tokenizer(
            document.text,
            add_special_tokens=False,
            return_offsets_mapping=True,
        )
        ids = encoding["input_ids"]
        offsets = encoding["offset_mapping"]
        word_ids = encoding.word_ids()
        if not ids:
            return []

        windows = self._windows(len(ids))
        cls_id = self.tokenizer.cls_token_id
        sep_id = self.tokenizer.sep_token_id
        pad_id = self.tokenizer.pad_token_id or 0

        # probability rows per content token; keep the window where the
        # token sits farthest from the window edge
        best_distance = [-1] * len(ids)
        probabilities: list = [None] * len(ids)

        for batch_start in range(0, len(windows), self.config.batch_size):
            batch = windows[batch_start : batch_start + self.config.batch_size]
            width = max(end - start for start, end in batch) + 2
            input_ids = []
            attention = []
            for start, end in batch:
                row = [cls_id] + ids[start:end] + [sep_id]
                mask = [1] * len(row)
                while len(row) < width:
                    row.append(pad_id)
                    mask.append(0)
                input_ids.append(row)
                attention.append(mask)
            with torch.no_grad():
                logits = self.model(
                    input_ids=torch.tensor(input_ids),
                    attention_mask=torch.tensor(attention),
                ).logits
            scores = torch.softmax(logits, dim=-1)
            for (start, end), rows in zip(batch, scores):
                for position in range(end - start):
                    token_index = start + position
                    distance = min(position, end - start - 1 - position)
                    if distance > best_distance[token_index]:
                        best_distance[token_index] = distance
                        probabilities[token_index] = rows[position + 1]  # skip [CLS]

        entries: list[dict] = []
        for token_index, (offset, word_id) in enumerate(zip(offsets, word_ids)):
            start, end = offset
            if start == end or word_id is None:
                continue
            row = probabilities[token_index]
            canonical = [float(row[column]) for column in self._canonical_columns]
            total = sum(canonical)
            canonical = [value / total for value in canonical]
            entries.append(
                {
                    "start": start,
                    "end": end,
                    "word_id": word_id,
                    "probs": canonical,
                }
            )
        return entries
