"""Shared test utilities: brute-force oracles and a synthetic KDD-style corpus."""

from __future__ import annotations

import math
import os
from collections import Counter
from pathlib import Path

import numpy as np

from antclust.classifier import MarkerSet

# -- oracles -----------------------------------------------------------------

def tiled_distance(a, b, dims):
    """Minimum Euclidean distance over the 3x3 tiling of grid copies."""
    w, h = dims
    best = math.inf
    for ax in (-1, 0, 1):
        for ay in (-1, 0, 1):
            dx = a[0] + ax * w - b[0]
            dy = a[1] + ay * h - b[1]
            best = min(best, math.sqrt(dx * dx + dy * dy))
    return best


def knn_virtual_windows(test_coords, markers: MarkerSet, k: int, dims):
    """k-NN oracle that copies every marker into all 9 virtual windows.

    Each marker's 9 copies live in the unwrapped plane and the marker votes
    once with its nearest copy's plain Euclidean distance. Ties follow the
    same chain as the implementation under test: distance then marker id for
    neighbor selection; vote count, then nearest tied marker, then lowest
    class index for the label. Integer squared distances keep everything
    exact.
    """
    w, h = dims
    mx = markers.coords[:, 0].astype(np.int64)
    my = markers.coords[:, 1].astype(np.int64)
    window_x = np.array([ax * w for ax in (-1, 0, 1) for _ay in (-1, 0, 1)])
    window_y = np.array([ay * h for _ax in (-1, 0, 1) for ay in (-1, 0, 1)])
    copies_x = mx[:, None] + window_x[None, :]   # (M, 9)
    copies_y = my[:, None] + window_y[None, :]
    ids = markers.ids.astype(np.int64)
    labels = markers.labels
    preds = []
    for tx, ty in np.asarray(test_coords, dtype=np.int64):
        d2 = ((copies_x - tx) ** 2 + (copies_y - ty) ** 2).min(axis=1)
        order = sorted(range(len(ids)), key=lambda i: (d2[i], ids[i]))[:k]
        nearest = [(int(d2[i]), int(labels[i])) for i in order]
        votes = Counter(lab for _d, lab in nearest)
        best = max(votes.values())
        tied = [c for c, v in votes.items() if v == best]
        if len(tied) == 1:
            preds.append(tied[0])
            continue
        nearest_d2 = {c: min(d for d, lab in nearest if lab == c) for c in tied}
        closest = min(nearest_d2.values())
        preds.append(min(c for c, d in nearest_d2.items() if d == closest))
    return np.array(preds, dtype=np.int32)


# -- synthetic KDD-style corpus -------------------------------------------------

_VOCAB = {
    1: ("tcp", "udp", "icmp"),
    2: ("http", "smtp", "ftp", "ftp_data", "telnet", "domain_u", "private",
        "ecr_i", "other", "finger"),
    3: ("SF", "REJ", "S0", "RSTO", "SH"),
    6: ("0", "1"),
    11: ("0", "1"),
    20: ("0", "1"),
    21: ("0", "1"),
}

# one attack name per class rotation, covering every label in the mapping
_LABELS_BY_CLASS = {
    1: ["normal"],
    2: ["satan", "ipsweep", "nmap", "portsweep"],
    3: ["back", "land", "neptune", "pod", "smurf", "teardrop"],
    4: ["buffer_overflow", "loadmodule", "perl", "rootkit"],
    5: ["guess_passwd", "ftp_write", "imap", "phf", "multihop",
        "warezmaster", "warezclient", "spy"],
}

DEFAULT_CLASS_SIZES = {1: 6000, 2: 800, 3: 7500, 4: 52, 5: 400}


def synth_kdd_lines(class_sizes=None, seed=0):
    """Fabricate KDD-format lines with the real label set and field kinds."""
    class_sizes = class_sizes or DEFAULT_CLASS_SIZES
    rng = np.random.Generator(np.random.PCG64(seed))
    lines = []
    for cls in sorted(class_sizes):
        names = _LABELS_BY_CLASS[cls]
        for i in range(class_sizes[cls]):
            fields = []
            for col in range(41):
                if col in _VOCAB:
                    fields.append(_VOCAB[col][int(rng.integers(len(_VOCAB[col])))])
                else:
                    # keep some class signal in a few continuous columns
                    base = cls * 100 if col in (4, 5, 22) else 0
                    fields.append(str(base + int(rng.integers(0, 1000))))
            fields.append(names[i % len(names)] + ".")
            lines.append(",".join(fields))
    return lines


def find_kdd_file():
    """Locate the public 10%-subset file if the user supplied one."""
    env = os.environ.get("ANTCLUST_KDD")
    candidates = [env] if env else []
    here = Path(__file__).resolve().parent.parent
    for name in ("kddcup.data_10_percent", "kddcup.data_10_percent.txt",
                 "kddcup.data_10_percent.csv", "kddcup.data.corrected"):
        candidates.append(here / "data" / name)
    for cand in candidates:
        if cand and Path(cand).is_file():
            return Path(cand)
    return None
