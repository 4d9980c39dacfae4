"""Dataset ingestion, instance-aligned view assembly, and synthetic data.

A dataset bundles a visual feature matrix (dimensions x instances), integer
class labels aligned with the feature columns, one class-level prototype
table per side-information type, and a disjoint seen/unseen class split.
Side information is stored per class; the fitters need it per instance, so
expand_side_info replicates each instance's class prototype into a column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matrix import as_matrix, load_matrix_csv, save_matrix_csv


@dataclass(frozen=True)
class ClassPrototypeTable:
    """One side-information type: one prototype vector per class id."""

    name: str
    vectors: np.ndarray  # (num_classes, dim), row order = class-id order

    def __post_init__(self):
        object.__setattr__(self, "vectors", as_matrix(self.vectors, self.name))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ZslDataset:
    features: np.ndarray  # (p, N)
    labels: np.ndarray  # (N,) int class ids
    class_names: tuple[str, ...]
    side_info: tuple[ClassPrototypeTable, ...]
    seen_classes: tuple[int, ...]
    unseen_classes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", as_matrix(self.features, "features"))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "seen_classes", tuple(sorted(self.seen_classes)))
        object.__setattr__(self, "unseen_classes", tuple(sorted(self.unseen_classes)))
        self._validate()

    def _validate(self):
        n_classes = len(self.class_names)
        seen = set(self.seen_classes)
        unseen = set(self.unseen_classes)
        if not seen or not unseen:
            raise ValueError("both seen and unseen class sets must be non-empty")
        overlap = seen & unseen
        if overlap:
            raise ValueError(f"classes in both splits: {sorted(overlap)}")
        all_ids = seen | unseen
        if all_ids != set(range(n_classes)):
            raise ValueError(
                f"seen/unseen must partition class ids 0..{n_classes - 1}, "
                f"got {sorted(all_ids)}"
            )
        if self.labels.shape != (self.features.shape[1],):
            raise ValueError(
                f"labels length {self.labels.shape[0]} does not match "
                f"{self.features.shape[1]} feature columns"
            )
        bad = set(np.unique(self.labels)) - all_ids
        if bad:
            raise ValueError(f"labels reference unknown classes: {sorted(bad)}")
        missing = all_ids - set(np.unique(self.labels))
        if missing:
            raise ValueError(f"classes without instances: {sorted(missing)}")
        for table in self.side_info:
            if table.vectors.shape[0] != n_classes:
                raise ValueError(
                    f"side-info table {table.name!r} has {table.vectors.shape[0]} "
                    f"rows, expected one per class ({n_classes})"
                )
        names = [t.name for t in self.side_info]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate side-info names: {names}")

    @property
    def num_instances(self) -> int:
        return self.features.shape[1]

    @property
    def side_info_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.side_info)

    def table(self, name: str) -> ClassPrototypeTable:
        for t in self.side_info:
            if t.name == name:
                return t
        raise KeyError(f"no side-info type named {name!r}; have {self.side_info_names}")


def instance_indices(dataset: ZslDataset, split: str) -> np.ndarray:
    """Column indices of the instances whose class belongs to the split."""
    classes = _split_classes(dataset, split)
    return np.flatnonzero(np.isin(dataset.labels, classes))


def _split_classes(dataset: ZslDataset, split: str) -> tuple[int, ...]:
    if split == "seen":
        return dataset.seen_classes
    if split == "unseen":
        return dataset.unseen_classes
    raise ValueError(f"split must be 'seen' or 'unseen', got {split!r}")


def expand_side_info(dataset: ZslDataset, split: str) -> list[np.ndarray]:
    """Materialize per-instance side-information matrices for a split.

    Returns one (q_k, N_split) matrix per side-information type; column j is
    the class prototype of instance j's label.
    """
    idx = instance_indices(dataset, split)
    labels = dataset.labels[idx]
    return [np.ascontiguousarray(t.vectors[labels].T) for t in dataset.side_info]


# ---------------------------------------------------------------------------
# Manifest loading and saving
# ---------------------------------------------------------------------------

def load_dataset(manifest_path) -> ZslDataset:
    """Load a dataset from a JSON manifest.

    Manifest keys: features (CSV path), labels (one class id per line),
    classes (list of names), side_info (list of {name, path}), seen and
    unseen (lists of class ids).  Relative paths resolve against the
    manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{manifest_path}: invalid JSON manifest: {exc}") from None
    for key in ("features", "labels", "classes", "side_info", "seen", "unseen"):
        if key not in manifest:
            raise ValueError(f"{manifest_path}: manifest missing key {key!r}")

    base = manifest_path.parent

    def resolve(rel) -> Path:
        path = Path(rel)
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise FileNotFoundError(f"file referenced by manifest not found: {path}")
        return path

    features = load_matrix_csv(resolve(manifest["features"]))
    labels = _load_labels(resolve(manifest["labels"]))
    class_names = tuple(str(c) for c in manifest["classes"])
    tables = []
    for entry in manifest["side_info"]:
        tables.append(
            ClassPrototypeTable(
                name=str(entry["name"]),
                vectors=load_matrix_csv(resolve(entry["path"])),
            )
        )
    return ZslDataset(
        features=features,
        labels=labels,
        class_names=class_names,
        side_info=tuple(tables),
        seen_classes=tuple(int(c) for c in manifest["seen"]),
        unseen_classes=tuple(int(c) for c in manifest["unseen"]),
    )


def _load_labels(path: Path) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ValueError(f"{path}: non-integer label at line {lineno}") from None
    return np.asarray(labels, dtype=np.int64)


def save_dataset(dataset: ZslDataset, out_dir) -> Path:
    """Write a dataset as manifest + CSV files; returns the manifest path.

    Matrices round-trip bit-exactly through the 17-digit CSV format.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out / "features.csv", dataset.features)
    with open(out / "labels.txt", "w", encoding="utf-8") as fh:
        for label in dataset.labels:
            fh.write(f"{int(label)}\n")
    side_entries = []
    for table in dataset.side_info:
        filename = f"side_{table.name}.csv"
        save_matrix_csv(out / filename, table.vectors)
        side_entries.append({"name": table.name, "path": filename})
    manifest = {
        "features": "features.csv",
        "labels": "labels.txt",
        "classes": list(dataset.class_names),
        "side_info": side_entries,
        "seen": list(dataset.seen_classes),
        "unseen": list(dataset.unseen_classes),
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest_path


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViewSpec:
    """Output dimension and noise level of one generated view.

    latent_dims optionally restricts the view to a subset of latent
    coordinates, which makes side-information types complementary.  sigma is
    the observation noise added to instance-level data; class prototype
    tables are emitted noiselessly, so it only affects the first (visual)
    view in the produced dataset.
    """

    dim: int
    sigma: float = 0.0
    latent_dims: tuple[int, ...] | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic multi-view generator.

    views[0] is the visual view; the remaining entries become
    side-information types.  latent_sigma is the per-instance spread of a
    class in latent space.  The last unseen_count class ids form the unseen
    split.
    """

    latent_dim: int
    class_count: int
    instances_per_class: int
    views: tuple[ViewSpec, ...]
    seed: int = 0
    latent_sigma: float = 0.0
    unseen_count: int = field(default=0)

    def __post_init__(self):
        if self.latent_dim < 1 or self.class_count < 1 or self.instances_per_class < 1:
            raise ValueError("latent_dim, class_count, instances_per_class must be >= 1")
        if len(self.views) < 2:
            raise ValueError("need the visual view plus at least one side-info view")
        if self.latent_sigma < 0 or any(v.sigma < 0 for v in self.views):
            raise ValueError("noise sigmas must be nonnegative")
        if any(v.dim < 1 for v in self.views):
            raise ValueError("view dims must be >= 1")
        unseen = self.unseen_count if self.unseen_count > 0 else max(1, self.class_count // 4)
        if unseen >= self.class_count:
            raise ValueError("unseen_count must leave at least one seen class")
        object.__setattr__(self, "unseen_count", unseen)
        for v in self.views:
            if v.latent_dims is not None:
                if not v.latent_dims or any(
                    not 0 <= i < self.latent_dim for i in v.latent_dims
                ):
                    raise ValueError(f"latent_dims out of range: {v.latent_dims}")


def generate_synthetic(spec: SyntheticSpec) -> ZslDataset:
    """Sample a multi-view dataset from a shared latent space.

    One latent prototype per class is drawn from a unit Gaussian; instances
    are the prototype plus latent noise; each view applies a fixed random
    full-rank linear map plus view noise.  Side-information tables are the
    noiseless view images of the class prototypes.  Deterministic given the
    seed.
    """
    rng = np.random.default_rng(spec.seed)
    prototypes = rng.standard_normal((spec.class_count, spec.latent_dim))
    maps = []
    for v in spec.views:
        g = rng.standard_normal((v.dim, spec.latent_dim))
        if v.dim >= spec.latent_dim:
            # orthonormal columns keep the latent geometry intact per view,
            # so a noiseless dataset is perfectly separable end to end
            g = np.linalg.qr(g)[0]
        maps.append(g)
    n = spec.class_count * spec.instances_per_class
    labels = np.repeat(np.arange(spec.class_count), spec.instances_per_class)
    latents = prototypes[labels]
    if spec.latent_sigma > 0:
        latents = latents + spec.latent_sigma * rng.standard_normal(latents.shape)

    def view_of(points: np.ndarray, view: ViewSpec, a: np.ndarray) -> np.ndarray:
        if view.latent_dims is not None:
            masked = np.zeros_like(points)
            cols = list(view.latent_dims)
            masked[:, cols] = points[:, cols]
            points = masked
        return a @ points.T

    visual = view_of(latents, spec.views[0], maps[0])
    if spec.views[0].sigma > 0:
        visual = visual + spec.views[0].sigma * rng.standard_normal(visual.shape)

    tables = []
    for k, view in enumerate(spec.views[1:], start=1):
        tables.append(
            ClassPrototypeTable(
                name=f"side{k}",
                vectors=np.ascontiguousarray(view_of(prototypes, view, maps[k]).T),
            )
        )

    seen = tuple(range(spec.class_count - spec.unseen_count))
    unseen = tuple(range(spec.class_count - spec.unseen_count, spec.class_count))
    return ZslDataset(
        features=visual,
        labels=labels,
        class_names=tuple(f"class{i}" for i in range(spec.class_count)),
        side_info=tuple(tables),
        seen_classes=seen,
        unseen_classes=unseen,
    )


def split_validation(
    seen_classes, fraction: float, seed: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Partition seen classes into disjoint train/validation class sets.

    Deterministic seeded shuffle; both sides must keep at least 2 classes.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    classes = sorted(int(c) for c in seen_classes)
    n_val = int(round(len(classes) * fraction))
    n_train = len(classes) - n_val
    if n_val < 2 or n_train < 2:
        raise ValueError(
            f"cannot split {len(classes)} classes at fraction {fraction}: "
            f"would leave {n_train} train / {n_val} validation (need >= 2 each)"
        )
    perm = np.random.default_rng(seed).permutation(len(classes))
    val = tuple(sorted(classes[i] for i in perm[:n_val]))
    train = tuple(sorted(classes[i] for i in perm[n_val:]))
    return train, val
