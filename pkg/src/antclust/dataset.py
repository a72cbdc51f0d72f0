"""Data preparation: KDD-Cup-99 connection records, attack-to-class mapping,
min-max scaling with categorical rank coding, the 12-variable reduced
projection, stratified splitting, and the synthetic Gaussian-cluster
generator.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

# The 41 connection features in canonical order, with their kinds.
# Discrete features get lexicographic rank codes before min-max scaling.
FEATURES = (
    ("duration", "continuous"),
    ("protocol_type", "discrete"),
    ("service", "discrete"),
    ("flag", "discrete"),
    ("src_bytes", "continuous"),
    ("dst_bytes", "continuous"),
    ("land", "discrete"),
    ("wrong_fragment", "continuous"),
    ("urgent", "continuous"),
    ("hot", "continuous"),
    ("num_failed_logins", "continuous"),
    ("logged_in", "discrete"),
    ("num_compromised", "continuous"),
    ("root_shell", "continuous"),
    ("su_attempted", "continuous"),
    ("num_root", "continuous"),
    ("num_file_creations", "continuous"),
    ("num_shells", "continuous"),
    ("num_access_files", "continuous"),
    ("num_outbound_cmds", "continuous"),
    ("is_host_login", "discrete"),
    ("is_guest_login", "discrete"),
    ("count", "continuous"),
    ("srv_count", "continuous"),
    ("serror_rate", "continuous"),
    ("srv_serror_rate", "continuous"),
    ("rerror_rate", "continuous"),
    ("srv_rerror_rate", "continuous"),
    ("same_srv_rate", "continuous"),
    ("diff_srv_rate", "continuous"),
    ("srv_diff_host_rate", "continuous"),
    ("dst_host_count", "continuous"),
    ("dst_host_srv_count", "continuous"),
    ("dst_host_same_srv_rate", "continuous"),
    ("dst_host_diff_srv_rate", "continuous"),
    ("dst_host_same_src_port_rate", "continuous"),
    ("dst_host_srv_diff_host_rate", "continuous"),
    ("dst_host_serror_rate", "continuous"),
    ("dst_host_srv_serror_rate", "continuous"),
    ("dst_host_rerror_rate", "continuous"),
    ("dst_host_srv_rerror_rate", "continuous"),
)
FEATURE_NAMES = tuple(name for name, _ in FEATURES)
N_FEATURES = len(FEATURES)

# 1-based positions of the reduced variable set: service, src_bytes,
# dst_bytes, logged_in, count, srv_count, serror_rate, srv_rerror_rate,
# srv_diff_host_rate, dst_host_count, dst_host_srv_count,
# dst_host_diff_srv_rate.
REDUCED_COLUMNS = (3, 5, 6, 12, 23, 24, 25, 28, 31, 32, 33, 35)
REDUCED_NAMES = tuple(FEATURE_NAMES[c - 1] for c in REDUCED_COLUMNS)

CLASS_NAMES = {1: "normal", 2: "probe", 3: "dos", 4: "u2r", 5: "r2l"}

# Attack name -> class, covering the 22 attack types of the 10% subset plus
# normal traffic. Compiled from the KDD-99 task's category listing; validated
# against the actual label set at load time (unknown labels are rejected).
ATTACK_CLASSES = {
    "normal": 1,
    "satan": 2, "ipsweep": 2, "nmap": 2, "portsweep": 2,
    "back": 3, "land": 3, "neptune": 3, "pod": 3, "smurf": 3, "teardrop": 3,
    "buffer_overflow": 4, "loadmodule": 4, "perl": 4, "rootkit": 4,
    "guess_passwd": 5, "ftp_write": 5, "imap": 5, "phf": 5,
    "multihop": 5, "warezmaster": 5, "warezclient": 5, "spy": 5,
}


@dataclass
class ConnectionRecord:
    """One connection: 41 raw field strings plus the attack label."""

    raw: tuple
    label: str


def parse_kdd(source: Union[str, bytes, io.IOBase]) -> list[ConnectionRecord]:
    """Parse comma-separated connection lines into records.

    Each line carries 41 features plus a label whose trailing period is
    stripped. A wrong field count raises a DataError naming the line.
    """
    if isinstance(source, bytes):
        lines = source.decode("utf-8").splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source.read()
        if isinstance(lines, bytes):
            lines = lines.decode("utf-8")
        lines = lines.splitlines()
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != N_FEATURES + 1:
            raise DataError(
                f"line {lineno}: expected {N_FEATURES + 1} fields, got {len(fields)}")
        label = fields[-1].rstrip(".")
        records.append(ConnectionRecord(tuple(fields[:-1]), label))
    return records


def map_attack_class(label: str) -> int:
    """Attack name to class 1..5; unknown names are an error, never coerced."""
    try:
        return ATTACK_CLASSES[label]
    except KeyError:
        raise DataError(f"unknown attack label {label!r}") from None


@dataclass
class Scaler:
    """Fitted per-feature transform onto [0, 1].

    Continuous features scale by the fit range and clamp outside it; discrete
    features map observed values to lexicographic rank codes first. A feature
    constant over the fit rows maps to 0.
    """

    kinds: tuple = field(default_factory=lambda: tuple(k for _, k in FEATURES))
    mins: Optional[np.ndarray] = None
    maxs: Optional[np.ndarray] = None
    codes: Optional[list] = None  # per discrete column: {value: rank}

    def transform_value(self, col: int, value: str) -> float:
        if self.kinds[col] == "discrete":
            table = self.codes[col]
            if value not in table:
                raise DataError(
                    f"unseen categorical value {value!r} in column {FEATURE_NAMES[col]}")
            v = float(table[value])
        else:
            try:
                v = float(value)
            except ValueError:
                raise DataError(
                    f"non-numeric value {value!r} in continuous column {FEATURE_NAMES[col]}")
        lo, hi = self.mins[col], self.maxs[col]
        if hi <= lo:
            return 0.0
        scaled = (v - lo) / (hi - lo)
        return min(1.0, max(0.0, scaled))

    def inverse_continuous(self, col: int, scaled: float) -> float:
        """Undo the scaling of a continuous column (round-trip check)."""
        if self.kinds[col] != "continuous":
            raise ConfigError(f"column {FEATURE_NAMES[col]} is not continuous")
        lo, hi = self.mins[col], self.maxs[col]
        return lo + scaled * (hi - lo)

    def to_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
            "codes": [c if c is not None else None for c in self.codes],
        }


def fit_apply_scaler(records: Sequence[ConnectionRecord],
                     fit_on: Optional[Sequence[int]] = None,
                     kinds: Optional[Sequence[str]] = None,
                     ) -> tuple[np.ndarray, Scaler]:
    """Fit a Scaler on a row subset (default: all rows) and transform all rows.

    Returns the (n_records, 41) matrix in [0, 1] plus the fitted scaler, which
    is immutable afterwards and safe to share across batch runs.
    """
    if not records:
        raise DataError("no records to scale")
    kinds = tuple(kinds) if kinds is not None else tuple(k for _, k in FEATURES)
    n_cols = len(records[0].raw)
    if len(kinds) != n_cols:
        raise ConfigError(f"got {len(kinds)} kinds for {n_cols} columns")
    fit_rows = range(len(records)) if fit_on is None else fit_on
    fit_rows = list(fit_rows)
    if not fit_rows:
        raise ConfigError("fit_on must select at least one row")

    codes: list[Optional[dict]] = [None] * n_cols
    mins = np.empty(n_cols)
    maxs = np.empty(n_cols)
    for col in range(n_cols):
        if kinds[col] == "discrete":
            values = sorted({records[i].raw[col] for i in fit_rows})
            codes[col] = {v: r for r, v in enumerate(values)}
            mins[col], maxs[col] = 0.0, float(len(values) - 1)
        else:
            column = np.array([float(records[i].raw[col]) for i in fit_rows])
            mins[col], maxs[col] = float(column.min()), float(column.max())

    scaler = Scaler(kinds=kinds, mins=mins, maxs=maxs, codes=codes)
    matrix = np.empty((len(records), n_cols), dtype=np.float64)
    for i, rec in enumerate(records):
        for col in range(n_cols):
            matrix[i, col] = scaler.transform_value(col, rec.raw[col])
    return matrix, scaler


def select_reduced_features(matrix: np.ndarray) -> np.ndarray:
    """Project the 41-column matrix onto the 12 reduced variables, in order."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[1] != N_FEATURES:
        raise DataError(
            f"expected a matrix with {N_FEATURES} columns, got shape {matrix.shape}")
    idx = [c - 1 for c in REDUCED_COLUMNS]
    return matrix[:, idx].copy()


def default_split_counts(class_counts: dict[int, int],
                         train_total: int = 5092,
                         test_total: int = 6890) -> dict[int, tuple[int, int]]:
    """Per-class (train, test) counts for the 5092/6890 split.

    Classes 3 and 4 are pinned (3000/4202 and 27/25); the remainder is filled
    proportionally to the source frequencies of classes 1, 2 and 5 by largest
    remainder, so totals come out exact.
    """
    pinned = {3: (3000, 4202), 4: (27, 25)}
    free = [c for c in sorted(class_counts) if c not in pinned]
    counts = dict(pinned)
    for idx, total in ((0, train_total - sum(v[0] for v in pinned.values())),
                       (1, test_total - sum(v[1] for v in pinned.values()))):
        weights = {c: class_counts[c] for c in free}
        wsum = sum(weights.values())
        if wsum == 0:
            raise DataError("no records outside the pinned classes")
        shares = {c: total * weights[c] / wsum for c in free}
        alloc = {c: int(shares[c]) for c in free}
        shortfall = total - sum(alloc.values())
        by_remainder = sorted(free, key=lambda c: (-(shares[c] - alloc[c]), c))
        for c in by_remainder[:shortfall]:
            alloc[c] += 1
        for c in free:
            prev = counts.get(c, (0, 0))
            counts[c] = (alloc[c], prev[1]) if idx == 0 else (prev[0], alloc[c])
    return counts


def stratified_split(labels: Sequence[int],
                     per_class: dict[int, tuple[int, int]],
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class sampling without replacement into train/test indices.

    Classes are processed in ascending order; for each, train+test indices are
    drawn at once and split, so the two sides are disjoint by construction.
    """
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in sorted(per_class):
        n_train, n_test = per_class[cls]
        pool = np.flatnonzero(labels == cls)
        if pool.size < n_train + n_test:
            raise DataError(
                f"class {cls}: need {n_train + n_test} records, only {pool.size} available")
        chosen = rng.choice(pool, size=n_train + n_test, replace=False)
        train_idx.extend(int(i) for i in chosen[:n_train])
        test_idx.extend(int(i) for i in chosen[n_train:])
    return np.array(train_idx, dtype=np.int64), np.array(test_idx, dtype=np.int64)


def generate_synthetic(classes: int = 4, per_class: int = 200, dims: int = 2,
                       separation: float = 0.5, seed: int = 0,
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian class clusters in [0,1]^dims for the synthetic experiment.

    Class means sit on Gray-code-ordered corners of the [0.15, 0.85]^dims box
    (for dims=2 that walks the four square corners cyclically), so up to
    2^dims classes fit. The per-feature deviation is separation/10, keeping
    intra-class distances well below inter-class ones. Returns
    (features, labels) with labels 1..classes.
    """
    if classes < 2:
        raise ConfigError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    if dims < 1:
        raise ConfigError(f"dims must be >= 1, got {dims}")
    if classes > 2 ** dims:
        raise ConfigError(
            f"cannot separate {classes} class means in {dims} dimensions")
    lo, hi = 0.15, 0.85
    means = np.empty((classes, dims))
    for c in range(classes):
        gray = c ^ (c >> 1)
        for axis in range(dims):
            means[c, axis] = hi if (gray >> axis) & 1 else lo
    for a in range(classes):
        for b in range(a + 1, classes):
            dist = float(np.linalg.norm(means[a] - means[b]))
            if dist < separation:
                raise ConfigError(
                    f"class means {a + 1} and {b + 1} are {dist:.3f} apart, "
                    f"below separation {separation}")
    rng = np.random.Generator(np.random.PCG64(seed))
    sd = separation / 10.0
    features = np.empty((classes * per_class, dims))
    labels = np.empty(classes * per_class, dtype=np.int32)
    for c in range(classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = rng.normal(means[c], sd, size=(per_class, dims))
        labels[block] = c + 1
    np.clip(features, 0.0, 1.0, out=features)
    return features, labels
