"""Emit prediction files in the mpru JSONL interchange format.

The format contract (header plus one record per line, probabilities in
[0, 1] summing to 1 within 1e-6) is what connects these exporters to the
unlearning toolkit; nothing else is shared.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

PREDS_FORMAT = "mpru-preds"
MANIFEST_FORMAT = "mpru-export-manifest"
FORMAT_VERSION = 1


def write_predictions_jsonl(
    path: Path | str,
    ids: Sequence[str],
    labels: Sequence[int],
    probs: np.ndarray,
    label_space: Sequence[int],
    n_labels: int,
) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != len(ids) or len(ids) != len(labels):
        raise ValueError("ids, labels and probs rows must align")
    if probs.shape[1] != len(label_space):
        raise ValueError("probs columns must match the label space")
    header = json.dumps(
        {
            "format": PREDS_FORMAT,
            "version": FORMAT_VERSION,
            "n_labels": int(n_labels),
            "label_space": [int(c) for c in label_space],
        },
        separators=(",", ":"),
    )
    with open(path, "w", encoding="utf-8", newline="") as stream:
        stream.write(header + "\n")
        for rec_id, label, row in zip(ids, labels, probs):
            line = json.dumps(
                {"id": str(rec_id), "label": int(label), "probs": row.tolist()},
                separators=(",", ":"),
                allow_nan=False,
            )
            stream.write(line + "\n")


def write_manifest(path: Path | str, dataset: str, seed: int, files: list[dict]) -> None:
    doc = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "dataset": dataset,
        "seed": int(seed),
        "files": files,
    }
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(doc, stream, indent=2)
        stream.write("\n")
