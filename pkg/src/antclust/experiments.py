"""Experiment orchestration: configuration resolution, the whole-set and
batched classification protocols, zoned marker layouts, and artifact export
(positions CSV, PGM renders, JSON reports, entropy traces).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifier import (
    EvaluationReport,
    MarkerSet,
    aggregate_reports,
    evaluate,
    knn_classify,
)
from .dataset import (
    FEATURE_NAMES,
    REDUCED_NAMES,
    default_split_counts,
    fit_apply_scaler,
    generate_synthetic,
    map_attack_class,
    parse_kdd,
    select_reduced_features,
    stratified_split,
)
from .engine import (
    Item,
    ROLE_MARKER,
    ROLE_TEST,
    SimParams,
    SimState,
    Snapshot,
    finalize_positions,
    init_run,
    run,
)
from .errors import ConfigError, DataError
from .habitat import Grid, create_grid
from .kernels import KernelParams

PLACEMENT_MODES = ("random", "five-box", "ten-stripe")

_KERNEL_FIELDS = ("beta", "sensory", "k1", "k2", "theta_items", "steepness",
                  "eta", "alpha", "evap", "direction_falloff")


@dataclass
class ExperimentConfig:
    """Fully resolved run settings; echoed verbatim into every run report."""

    mode: str = "synthetic"          # synthetic | run-a | run-b
    features: str = "reduced"        # full | reduced (prepare only)
    data: Optional[str] = None       # raw KDD CSV for prepare
    train: Optional[str] = None      # prepared marker CSV
    test: Optional[str] = None       # prepared test CSV
    items: Optional[str] = None      # item CSV for a single cluster run
    out: str = "out"
    seed: int = 0
    steps: int = 1_000_000
    grid: Optional[tuple[int, int]] = None
    ants: Optional[int] = None
    k: int = 3
    batch_size: int = 1000
    placement: str = "random"
    snapshots: str = "geometric"     # "geometric" or comma-separated steps
    vote_rule: str = "strict"
    kernel: dict = field(default_factory=dict)  # overrides of KernelParams
    # synthetic generation
    classes: int = 4
    per_class: int = 200
    dims: int = 2
    separation: float = 0.5
    marker_fraction: float = 0.0

    def validate(self) -> None:
        if self.placement not in PLACEMENT_MODES:
            raise ConfigError(f"placement must be one of {PLACEMENT_MODES}")
        if self.features not in ("full", "reduced"):
            raise ConfigError("features must be 'full' or 'reduced'")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if not 0.0 <= self.marker_fraction <= 1.0:
            raise ConfigError("marker_fraction must lie in [0, 1]")
        unknown = set(self.kernel) - set(_KERNEL_FIELDS)
        if unknown:
            raise ConfigError(f"unknown kernel parameters: {sorted(unknown)}")
        self.kernel_params().validate()
        self.sim_params().validate()
        self.snapshot_schedule()

    def kernel_params(self) -> KernelParams:
        return KernelParams(**{k: float(v) for k, v in self.kernel.items()})

    def sim_params(self) -> SimParams:
        return SimParams(kernel=self.kernel_params(), t_max=self.steps,
                         vote_rule=self.vote_rule)

    def snapshot_schedule(self) -> Optional[list[int]]:
        """None selects the engine's geometric default."""
        if self.snapshots == "geometric":
            return None
        try:
            return [int(v) for v in self.snapshots.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad snapshot list {self.snapshots!r}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid) if self.grid else None
        del d["out"]  # keep artifacts byte-comparable across output locations
        return d


def parse_grid_spec(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ConfigError(f"grid must look like WIDTHxHEIGHT, got {text!r}") from None


def load_config_file(path) -> dict:
    """Flat key = value lines; '#' starts a comment; dashes equal underscores."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def resolve_config(file_values: Optional[dict] = None, **overrides) -> ExperimentConfig:
    """Merge file values under explicit overrides onto the defaults."""
    cfg = ExperimentConfig()
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in merged.items():
        if key in _KERNEL_FIELDS:
            cfg.kernel[key] = float(value)
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown configuration key {key!r}")
        current = getattr(cfg, key)
        if key == "grid":
            value = parse_grid_spec(value) if isinstance(value, str) else tuple(value)
        elif key == "kernel":
            cfg.kernel.update(value)
            continue
        elif isinstance(current, bool):
            value = str(value).lower() in ("1", "true", "yes")
        elif isinstance(current, int) and not isinstance(value, bool):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


# -- zoned marker placement --------------------------------------------------

def place_markers_zoned(rng, grid: Grid, items: Sequence[Item],
                        mode: str) -> dict:
    """Initial marker coordinates for the zoned layouts; test items stay
    unplaced here and later fall uniformly anywhere.

    five-box: class 1's box sits in the bottom-left corner (high y, low x),
    classes 2-4 follow clockwise (top-left, top-right, bottom-right) and
    class 5 takes a centered box; box sides are one third of the grid side.
    ten-stripe: ten equal-width vertical stripes assigned 1..5 then 1..5 from
    the left, two stripes per class.
    """
    marker_by_class: dict[int, list[Item]] = {}
    for it in items:
        if it.role == "marker":
            if it.true_class is None:
                raise ConfigError(f"marker {it.id} has no class; zoned layout needs one")
            marker_by_class.setdefault(it.true_class, []).append(it)
    if mode == "five-box":
        zones = _five_box_zones(grid)
    elif mode == "ten-stripe":
        zones = _ten_stripe_zones(grid)
    else:
        raise ConfigError(f"unknown zoned placement {mode!r}")

    coords: dict[int, tuple[int, int]] = {}
    taken: set[int] = set()
    for cls in sorted(marker_by_class):
        group = marker_by_class[cls]
        if cls not in zones:
            raise ConfigError(f"no zone defined for class {cls} in mode {mode}")
        pool = [c for c in zones[cls] if c not in taken]
        if len(pool) < len(group):
            raise ConfigError(
                f"zone for class {cls} holds {len(pool)} cells, "
                f"{len(group)} markers requested")
        chosen = rng.choice(len(pool), size=len(group), replace=False)
        for it, ci in zip(group, chosen):
            cell = pool[int(ci)]
            taken.add(cell)
            coords[it.id] = grid.coord(cell)
    return coords


def _five_box_zones(grid: Grid) -> dict[int, list[int]]:
    bw, bh = grid.width // 3, grid.height // 3
    if bw == 0 or bh == 0:
        raise ConfigError(f"grid {grid.width}x{grid.height} too small for five-box zones")
    anchors = {
        1: (0, grid.height - bh),                      # bottom-left
        2: (0, 0),                                     # top-left
        3: (grid.width - bw, 0),                       # top-right
        4: (grid.width - bw, grid.height - bh),        # bottom-right
        5: ((grid.width - bw) // 2, (grid.height - bh) // 2),  # center
    }
    zones = {}
    for cls, (x0, y0) in anchors.items():
        zones[cls] = [grid.flat((x, y))
                      for y in range(y0, y0 + bh)
                      for x in range(x0, x0 + bw)]
    return zones


def _ten_stripe_zones(grid: Grid) -> dict[int, list[int]]:
    if grid.width < 10:
        raise ConfigError(f"grid width {grid.width} too small for ten stripes")
    base, extra = divmod(grid.width, 10)
    edges = [0]
    for s in range(10):
        edges.append(edges[-1] + base + (1 if s < extra else 0))
    zones: dict[int, list[int]] = {c: [] for c in range(1, 6)}
    for s in range(10):
        cls = s % 5 + 1
        zones[cls].extend(grid.flat((x, y))
                          for y in range(grid.height)
                          for x in range(edges[s], edges[s + 1]))
    return zones


# -- clustering + classification ---------------------------------------------

@dataclass
class ClusterResult:
    state: SimState
    snapshots: list
    report: Optional[EvaluationReport]
    predictions: dict  # test item id -> predicted class
    grid: Grid
    n_ants: int
    elapsed: float


def run_clustering(items: list[Item], config: ExperimentConfig, seed: int,
                   use_fast: bool = True) -> ClusterResult:
    """One full pipeline pass: init, run to t_max, finalize, classify if the
    item set carries both markers and test items."""
    t0 = time.perf_counter()
    grid = create_grid(len(items), config.grid)
    placer = None
    if config.placement != "random":
        mode = config.placement
        placer = lambda rng, g, its: place_markers_zoned(rng, g, its, mode)
    state = init_run(items, grid, seed, n_ants=config.ants,
                     params=config.sim_params(), place_items=placer)
    n_ants = state.n_ants
    state, snapshots = run(state, config.snapshot_schedule(), use_fast=use_fast)
    finalize_positions(state)
    # the t_max snapshot must show final printed locations, not carried items
    final_snap = state.snapshot()
    if snapshots and snapshots[-1].t == state.t:
        snapshots[-1] = final_snap
    else:
        snapshots.append(final_snap)
    report, predictions = classify_state(state, config.k)
    return ClusterResult(state, snapshots, report, predictions, grid,
                         n_ants, time.perf_counter() - t0)


def classify_state(state: SimState, k: int):
    """k-NN the test items against marker positions; returns (report, preds).

    Skips quietly when the run has no test items; scoring additionally needs
    every test item to carry a true class.
    """
    marker_idx = np.flatnonzero(state.roles == ROLE_MARKER)
    test_idx = np.flatnonzero(state.roles == ROLE_TEST)
    if test_idx.size == 0:
        return None, {}
    labeled = marker_idx[state.classes[marker_idx] >= 0]
    if labeled.size == 0:
        raise ConfigError("no labeled markers available for classification")
    coords = np.array([state.grid.coord(int(c)) for c in state.item_cell[labeled]],
                      dtype=np.int64)
    markers = MarkerSet(ids=state.ids[labeled], coords=coords,
                        labels=state.classes[labeled])
    test_coords = np.array([state.grid.coord(int(c)) for c in state.item_cell[test_idx]],
                           dtype=np.int64)
    preds = knn_classify(test_coords, markers, k,
                         (state.grid.width, state.grid.height))
    predictions = {int(state.ids[i]): int(p) for i, p in zip(test_idx, preds)}
    truths = state.classes[test_idx]
    report = None
    if np.all(truths >= 0):
        report = evaluate(preds, truths)
    return report, predictions


def build_items(ids: Sequence[int], features: np.ndarray,
                classes: Sequence, roles: Sequence[str]) -> list[Item]:
    return [Item(id=int(i), features=features[n],
                 role=roles[n],
                 true_class=None if classes[n] is None else int(classes[n]))
            for n, i in enumerate(ids)]


# -- protocol drivers ---------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    batches: list          # per-batch dicts (report, entropy trace, sizes)
    aggregate: Optional[dict]
    timings: dict

    def to_dict(self, with_timings: bool = False) -> dict:
        d = {"config": self.config, "batches": self.batches,
             "aggregate": self.aggregate}
        if with_timings:
            d["timings"] = self.timings
        return d


def _batch_entry(index: int, items: list[Item], result: ClusterResult) -> dict:
    return {
        "batch": index,
        "n_items": len(items),
        "n_markers": sum(1 for it in items if it.role == "marker"),
        "n_test": sum(1 for it in items if it.role == "test"),
        "grid": [result.grid.width, result.grid.height],
        "n_ants": result.n_ants,
        "entropy_trace": [[s.t, s.entropy] for s in result.snapshots],
        "report": result.report.to_dict() if result.report else None,
    }


def run_antids_a(config: ExperimentConfig,
                 out_dir: Optional[Path] = None) -> RunReport:
    """Whole-set protocol: every marker and test item in one clustering run."""
    markers = load_items_csv(config.train, role="marker")
    tests = load_items_csv(config.test, role="test")
    items = markers + tests
    result = run_clustering(items, config, config.seed)
    entry = _batch_entry(0, items, result)
    report = RunReport(
        config=config.to_dict(),
        batches=[entry],
        aggregate=result.report.to_dict() if result.report else None,
        timings={"total_s": result.elapsed},
    )
    if out_dir is not None:
        export_artifacts(out_dir, result.snapshots, report,
                         pheromone=field_2d(result.state),
                         predictions=result.predictions)
    return report


def run_antids_b(config: ExperimentConfig,
                 out_dir: Optional[Path] = None) -> RunReport:
    """Batched protocol: the full marker set plus successive test slices,
    each slice an independent run (fresh grid, seed + batch index)."""
    markers = load_items_csv(config.train, role="marker")
    tests = load_items_csv(config.test, role="test")
    batches = [tests[i:i + config.batch_size]
               for i in range(0, len(tests), config.batch_size)]
    entries = []
    reports = []
    timings = {}
    for b, batch in enumerate(batches):
        items = markers + batch
        result = run_clustering(items, config, config.seed + b)
        entries.append(_batch_entry(b, items, result))
        if result.report is not None:
            reports.append(result.report)
        timings[f"batch_{b}_s"] = result.elapsed
        if out_dir is not None:
            export_artifacts(Path(out_dir) / f"batch_{b:02d}", result.snapshots,
                             None, pheromone=field_2d(result.state),
                             predictions=result.predictions)
    aggregate = aggregate_reports(reports).to_dict() if reports else None
    report = RunReport(config=config.to_dict(), batches=entries,
                       aggregate=aggregate, timings=timings)
    if out_dir is not None:
        _write_json(Path(out_dir) / "report.json", report.to_dict())
        _write_json(Path(out_dir) / "timings.json", report.timings)
        _write_json(Path(out_dir) / "resolved_config.json", report.config)
    return report


def run_synthetic(config: ExperimentConfig,
                  out_dir: Optional[Path] = None) -> RunReport:
    """Synthetic clustering run, optionally with a marker/test split."""
    features, labels = generate_synthetic(
        classes=config.classes, per_class=config.per_class, dims=config.dims,
        separation=config.separation, seed=config.seed)
    roles = synthetic_roles(labels, config.marker_fraction)
    items = build_items(range(len(labels)), features, labels, roles)
    result = run_clustering(items, config, config.seed)
    entry = _batch_entry(0, items, result)
    report = RunReport(
        config=config.to_dict(),
        batches=[entry],
        aggregate=result.report.to_dict() if result.report else None,
        timings={"total_s": result.elapsed},
    )
    if out_dir is not None:
        export_artifacts(out_dir, result.snapshots, report,
                         pheromone=field_2d(result.state),
                         predictions=result.predictions)
    return report


def synthetic_roles(labels: Sequence[int], marker_fraction: float) -> list[str]:
    """Per class, the first floor(fraction * count) items become markers.

    fraction 0 labels everything a marker (pure clustering, nothing to
    score); anything above 0 carves out a held-out test share per class.
    """
    labels = np.asarray(labels)
    roles = ["marker"] * len(labels)
    if marker_fraction <= 0.0:
        return roles
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        n_markers = int(marker_fraction * idx.size)
        for j in idx[n_markers:]:
            roles[int(j)] = "test"
    return roles


# -- data preparation ---------------------------------------------------------

def prepare_splits(config: ExperimentConfig, out_dir: Path) -> dict:
    """Raw KDD CSV to normalized, stratified train/test item CSVs."""
    if not config.data:
        raise ConfigError("prepare needs --data pointing at the KDD CSV")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = Path(config.data).read_bytes()
    records = parse_kdd(raw)
    if not records:
        raise DataError(f"{config.data}: no records")
    labels = np.array([map_attack_class(r.label) for r in records])
    matrix, scaler = fit_apply_scaler(records)
    if config.features == "reduced":
        matrix = select_reduced_features(matrix)
        names = REDUCED_NAMES
    else:
        names = FEATURE_NAMES
    class_counts = {int(c): int(n) for c, n in zip(*np.unique(labels, return_counts=True))}
    counts = default_split_counts(class_counts)
    train_idx, test_idx = stratified_split(labels, counts, config.seed)
    train_idx = np.sort(train_idx)  # file order keeps later batches class-mixed
    test_idx = np.sort(test_idx)
    write_items_csv(out_dir / "train.csv", train_idx, matrix, labels, names)
    write_items_csv(out_dir / "test.csv", test_idx, matrix, labels, names)
    _write_json(out_dir / "scaler.json", scaler.to_dict())
    summary = {
        "records": len(records),
        "class_counts": class_counts,
        "split_counts": {str(c): list(v) for c, v in sorted(counts.items())},
        "train_size": int(train_idx.size),
        "test_size": int(test_idx.size),
        "features": config.features,
        "seed": config.seed,
    }
    _write_json(out_dir / "prepare_report.json", summary)
    return summary


def write_items_csv(path, ids, matrix, labels, feature_names) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *feature_names, "class"])
        for i in ids:
            writer.writerow([int(i), *[repr(float(v)) for v in matrix[i]],
                             int(labels[i])])


def load_items_csv(path, role: str = "marker") -> list[Item]:
    """Read an item CSV (id, features..., class[, role]) into engine items."""
    if not path:
        raise ConfigError(f"missing item CSV path for role {role!r}")
    items = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        has_role = header[-1] == "role"
        cls_col = -2 if has_role else -1
        for lineno, row in enumerate(reader, start=2):
            try:
                item_id = int(row[0])
                feats = [float(v) for v in row[1:cls_col]]
                cls = row[cls_col]
                true_class = int(cls) if cls not in ("", "None") else None
                r = row[-1] if has_role else role
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed item row") from None
            items.append(Item(id=item_id, features=np.array(feats),
                              role=r, true_class=true_class))
    if not items:
        raise DataError(f"{path}: no items")
    return items


def write_synth_csv(path, features: np.ndarray, labels, roles) -> None:
    names = [f"f{j}" for j in range(features.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *names, "class", "role"])
        for i in range(len(labels)):
            writer.writerow([i, *[repr(float(v)) for v in features[i]],
                             int(labels[i]), roles[i]])


# -- artifact export ----------------------------------------------------------

def field_2d(state: SimState) -> np.ndarray:
    return state.grid.pheromone.reshape(state.grid.height, state.grid.width)


def export_artifacts(out_dir, snapshots: Sequence[Snapshot],
                     report: Optional[RunReport] = None,
                     pheromone: Optional[np.ndarray] = None,
                     predictions: Optional[dict] = None) -> None:
    """Write positions CSVs, PGM renders, the report JSON and entropy trace."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictions = predictions or {}
    for snap in snapshots:
        tag = f"t{snap.t}"
        write_positions_csv(out_dir / f"positions_{tag}.csv", snap, predictions)
        write_pgm(out_dir / f"items_{tag}.pgm", render_item_map(snap))
        write_pgm(out_dir / f"roles_{tag}.pgm", render_role_map(snap))
    if pheromone is not None:
        write_pgm(out_dir / "pheromone_final.pgm", render_pheromone(pheromone))
    if snapshots:
        with open(out_dir / "entropy.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "entropy"])
            for snap in snapshots:
                writer.writerow([snap.t, repr(snap.entropy)])
    if report is not None:
        _write_json(out_dir / "report.json", report.to_dict())
        _write_json(out_dir / "timings.json", report.timings)
        _write_json(out_dir / "resolved_config.json", report.config)


def write_positions_csv(path, snapshot: Snapshot, predictions: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "x", "y", "role", "true_class", "predicted_class"])
        for item_id, x, y, role, cls in snapshot.placements:
            writer.writerow([
                item_id,
                "" if x is None else x,
                "" if y is None else y,
                role,
                "" if cls is None else cls,
                predictions.get(item_id, ""),
            ])


def read_positions_csv(path) -> Snapshot:
    """Rebuild a renderable snapshot from an exported positions CSV."""
    placements = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "item_id":
            raise DataError(f"{path}: not a positions CSV")
        for lineno, row in enumerate(reader, start=2):
            try:
                item_id = int(row[0])
                x = int(row[1]) if row[1] else None
                y = int(row[2]) if row[2] else None
                role = row[3]
                cls = int(row[4]) if row[4] else None
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed position row") from None
            placements.append((item_id, x, y, role, cls))
    return Snapshot(t=0, width=0, height=0, placements=placements,
                    entropy=0.0, pheromone_stats=(0.0, 0.0, 0.0))


def render_item_map(snapshot: Snapshot, n_classes: int = 5) -> np.ndarray:
    """Gray level per class, 0 for empty cells; classless items show as the
    top level so they stay visible."""
    img = np.zeros((snapshot.height, snapshot.width), dtype=np.int64)
    for _id, x, y, _role, cls in snapshot.placements:
        if x is None:
            continue
        level = 255 if cls is None else round(255 * cls / n_classes)
        img[y, x] = level
    return img

def render_role_map(snapshot: Snapshot) -> np.ndarray:
    img = np.zeros((snapshot.height, snapshot.width), dtype=np.int64)
    for _id, x, y, role, _cls in snapshot.placements:
        if x is None:
            continue
        img[y, x] = 128 if role == "marker" else 255
    return img


def render_pheromone(field: np.ndarray) -> np.ndarray:
    """Scale the field so its maximum maps to 255; an all-zero field stays 0."""
    peak = float(field.max()) if field.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(field, dtype=np.int64)
    return np.rint(field * (255.0 / peak)).astype(np.int64)


def write_pgm(path, levels: np.ndarray, maxval: int = 255) -> None:
    """Plain-text PGM (P2): bit-exact, diffable, viewable everywhere."""
    h, w = levels.shape
    lines = [f"P2\n{w} {h}\n{maxval}\n"]
    for row in levels:
        lines.append(" ".join(str(int(v)) for v in row) + "\n")
    Path(path).write_text("".join(lines))


def _write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
