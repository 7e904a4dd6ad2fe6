"""The bundled synthetic corpus: materialise it on disk and read it back.

The corpus is described by ``data/synthetic_corpus.json`` (recording ids,
class, split, duration, sampling rate, seed and seizure intervals). Building
it writes one EDF per recording, with non-EEG channels added and channel
order shuffled so montage selection has work to do, plus an annotation CSV.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import MalformedFile
from .signal_io import (
    SeizureAnnotation,
    SeizureType,
    synth_recording,
    write_annotations,
    write_edf,
)

INDEX_NAME = "corpus.json"


def bundled_spec():
    text = resources.files("pgnbsc").joinpath("data/synthetic_corpus.json").read_text()
    return json.loads(text)


def _extra_channel(name, n, rate, rng):
    t = np.arange(n) / rate
    if name.upper().startswith(("ECG", "EKG")):
        beats = (t * 1.2) % 1.0
        return 800.0 * np.exp(-0.5 * ((beats - 0.5) / 0.012) ** 2) + rng.normal(0, 5, n)
    return 50.0 * (np.sin(2 * np.pi * 2.0 * t) > 0.9)


def build_corpus(out_dir, spec=None):
    """Write every recording of ``spec`` (default: bundled) into ``out_dir``."""
    spec = spec or bundled_spec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = {"name": spec["name"], "version": spec["version"], "recordings": []}
    for entry in spec["recordings"]:
        rec = synth_recording(entry["label"], entry["duration_s"], entry["rate"],
                              entry["seed"])
        rng = np.random.default_rng(entry["seed"] + 1)
        extras = spec.get("extra_channels", [])
        data = [*rec.data] + [_extra_channel(e, rec.n_samples, rec.rate, rng)
                              for e in extras]
        labels = list(rec.labels) + list(extras)
        order = rng.permutation(len(labels))
        rec = rec.replace(labels=[labels[i] for i in order],
                          data=np.vstack([data[i] for i in order]),
                          source_id=entry["id"])
        edf = out / f"{entry['id']}.edf"
        ann = out / f"{entry['id']}.csv"
        write_edf(rec, edf)
        label = SeizureType.parse(entry["label"])
        write_annotations([SeizureAnnotation(a, b, label)
                           for a, b in entry["annotations"]], ann)
        index["recordings"].append({"id": entry["id"], "split": entry["split"],
                                    "recording": edf.name, "annotations": ann.name})
    (out / INDEX_NAME).write_text(json.dumps(index, indent=1) + "\n")
    return out


def load_index(corpus_dir):
    """``[(id, split, recording_path, annotation_path), ...]`` from ``corpus.json``."""
    d = Path(corpus_dir)
    path = d / INDEX_NAME
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        doc = json.loads(path.read_text())
        return [(r["id"], r["split"], d / r["recording"], d / r["annotations"])
                for r in doc["recordings"]]
    except (ValueError, KeyError) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
