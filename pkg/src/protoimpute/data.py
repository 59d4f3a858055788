"""Bi-view datasets: synthetic generation, missing-view simulation, file I/O.

A dataset holds two raw feature matrices, a per-instance observation mask,
and optional ground-truth class labels. Entries of unobserved views are
stored as zeros; the mask is the source of truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, DataFormatError
from .seeding import rng_for

META_FIELDS = ("n", "d1", "d2", "k", "seed", "missing_rate")


@dataclass
class MultiViewDataset:
    """Two feature views over the same instances plus an observation mask."""

    view1: np.ndarray
    view2: np.ndarray
    mask: np.ndarray  # n x 2 booleans: observed in view 1 / view 2
    labels: np.ndarray | None = None
    cluster_count: int | None = None
    seed: int | None = None
    missing_rate: float = 0.0

    def __post_init__(self):
        self.view1 = np.ascontiguousarray(self.view1, dtype=np.float64)
        self.view2 = np.ascontiguousarray(self.view2, dtype=np.float64)
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        if self.view1.ndim != 2 or self.view2.ndim != 2:
            raise ContractError("views must be 2-D matrices")
        n = self.view1.shape[0]
        if self.view2.shape[0] != n:
            raise ContractError(
                f"views disagree on instance count: {n} vs {self.view2.shape[0]}"
            )
        if self.mask.shape != (n, 2):
            raise ContractError(f"mask must be {n}x2, got {self.mask.shape}")
        if not self.mask.any(axis=1).all():
            raise ContractError("every instance must be observed in at least one view")
        if not (np.isfinite(self.view1).all() and np.isfinite(self.view2).all()):
            raise ContractError("views contain non-finite values")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.intp)
            if self.labels.shape != (n,):
                raise ContractError(
                    f"labels length {self.labels.shape} does not match n={n}"
                )

    @property
    def n(self) -> int:
        return self.view1.shape[0]

    @property
    def view_dims(self) -> tuple[int, int]:
        return self.view1.shape[1], self.view2.shape[1]

    def view(self, index: int) -> np.ndarray:
        return (self.view1, self.view2)[index]

    def observed_indices(self, view: int) -> np.ndarray:
        return np.flatnonzero(self.mask[:, view])

    def complete_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.all(axis=1))

    def only_indices(self, view: int) -> np.ndarray:
        """Instances observed in `view` and missing in the other one."""
        return np.flatnonzero(self.mask[:, view] & ~self.mask[:, 1 - view])

    def resolved_cluster_count(self) -> int:
        if self.cluster_count is not None:
            return int(self.cluster_count)
        if self.labels is not None:
            return int(self.labels.max()) + 1
        raise ConfigError("dataset has neither a cluster count nor labels")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a separable bi-view dataset built from a Gaussian mixture."""

    n: int = 600
    k: int = 3
    latent_dim: int = 4
    view_dims: tuple[int, int] = (12, 10)
    separation: float = 8.0
    hidden_width: int = 32
    noise_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.k < 2 or self.n < self.k:
            raise ConfigError("synthetic spec requires n >= k >= 2")
        if not self.separation > 0.0:
            raise ConfigError("synthetic spec requires separation > 0")
        if self.latent_dim < 1 or self.hidden_width < 1:
            raise ConfigError("synthetic spec requires positive dimensions")
        if min(self.view_dims) < 1:
            raise ConfigError("synthetic spec requires positive view dimensions")
        if self.noise_scale < 0.0:
            raise ConfigError("synthetic spec requires noise_scale >= 0")


def latent_mixture(
    spec: SyntheticSpec, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centers, labels, and latent points of the generating mixture.

    Components are unit-variance spherical Gaussians; the centers are
    rescaled so the minimum pairwise center distance equals
    ``spec.separation``. Class sizes are balanced to within one instance.
    """
    if rng is None:
        rng = rng_for(spec.seed, "synthetic")
    centers = rng.standard_normal((spec.k, spec.latent_dim))
    dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    min_dist = dists[~np.eye(spec.k, dtype=bool)].min()
    centers *= spec.separation / min_dist

    base, extra = divmod(spec.n, spec.k)
    counts = [base + (1 if c < extra else 0) for c in range(spec.k)]
    labels = np.repeat(np.arange(spec.k), counts)
    rng.shuffle(labels)

    latent = centers[labels] + rng.standard_normal((spec.n, spec.latent_dim))
    return centers, labels, latent


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Sample a fully observed dataset from a separated Gaussian mixture.

    Each view is an independent fixed random one-hidden-layer tanh map of
    the latent mixture points plus isotropic Gaussian noise.
    """
    rng = rng_for(spec.seed, "synthetic")
    centers, labels, latent = latent_mixture(spec, rng)

    views = []
    for dim in spec.view_dims:
        w1 = rng.standard_normal((spec.latent_dim, spec.hidden_width))
        w1 /= np.sqrt(spec.latent_dim)
        b1 = 0.1 * rng.standard_normal(spec.hidden_width)
        w2 = rng.standard_normal((spec.hidden_width, dim)) / np.sqrt(spec.hidden_width)
        b2 = 0.1 * rng.standard_normal(dim)
        mapped = np.tanh(latent @ w1 + b1) @ w2 + b2
        mapped += spec.noise_scale * rng.standard_normal((spec.n, dim))
        views.append(mapped)

    return MultiViewDataset(
        view1=views[0],
        view2=views[1],
        mask=np.ones((spec.n, 2), dtype=bool),
        labels=labels,
        cluster_count=spec.k,
        seed=spec.seed,
        missing_rate=0.0,
    )


def apply_missing(ds: MultiViewDataset, missing_rate: float, seed: int) -> MultiViewDataset:
    """Remove exactly one view for round(missing_rate * n) distinct instances.

    Victims are drawn uniformly without replacement and the dropped view is
    chosen uniformly per victim. Observed entries are untouched; dropped
    entries are zeroed, with the mask recording the removal.
    """
    rate = float(missing_rate)
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"missing rate must lie in [0, 1), got {rate}")
    if not ds.mask.all():
        raise ContractError("apply_missing requires a fully observed dataset")

    m = int(round(rate * ds.n))
    rng = rng_for(seed, "missing")
    victims = rng.choice(ds.n, size=m, replace=False)
    dropped_view = rng.integers(0, 2, size=m)

    mask = ds.mask.copy()
    views = [ds.view1.copy(), ds.view2.copy()]
    for instance, view in zip(victims, dropped_view):
        mask[instance, view] = False
        views[view][instance, :] = 0.0

    return MultiViewDataset(
        view1=views[0],
        view2=views[1],
        mask=mask,
        labels=None if ds.labels is None else ds.labels.copy(),
        cluster_count=ds.cluster_count,
        seed=seed,
        missing_rate=rate,
    )


def save_dataset(ds: MultiViewDataset, directory) -> None:
    """Write view1.csv, view2.csv, mask.csv, optional labels.csv, meta.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "view1.csv", ds.view1, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "view2.csv", ds.view2, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "mask.csv", ds.mask.astype(int), fmt="%d", delimiter=",")
    if ds.labels is not None:
        np.savetxt(directory / "labels.csv", ds.labels, fmt="%d")
    meta = {
        "n": ds.n,
        "d1": ds.view_dims[0],
        "d2": ds.view_dims[1],
        "k": ds.cluster_count,
        "seed": ds.seed,
        "missing_rate": ds.missing_rate,
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_dataset(directory) -> MultiViewDataset:
    """Read a dataset directory written by ``save_dataset`` or external tools."""
    directory = Path(directory)
    view1 = _read_matrix(directory / "view1.csv")
    view2 = _read_matrix(directory / "view2.csv")
    mask_values = _read_matrix(directory / "mask.csv")

    if mask_values.shape[1] != 2:
        raise DataFormatError(
            f"mask must have 2 columns, got {mask_values.shape[1]}",
            path=str(directory / "mask.csv"),
        )
    if not np.isin(mask_values, (0.0, 1.0)).all():
        raise DataFormatError(
            "mask entries must be 0 or 1", path=str(directory / "mask.csv")
        )
    n = view1.shape[0]
    for name, arr in (("view2.csv", view2), ("mask.csv", mask_values)):
        if arr.shape[0] != n:
            raise DataFormatError(
                f"row count {arr.shape[0]} does not match view1.csv ({n})",
                path=str(directory / name),
            )

    labels = None
    labels_path = directory / "labels.csv"
    if labels_path.exists():
        raw = _read_matrix(labels_path)
        if raw.shape[1] != 1:
            raise DataFormatError(
                "labels must have one column", path=str(labels_path)
            )
        if raw.shape[0] != n:
            raise DataFormatError(
                f"labels length {raw.shape[0]} does not match n={n}",
                path=str(labels_path),
            )
        labels = raw[:, 0].astype(np.intp)

    meta_path = directory / "meta.json"
    cluster_count = None
    seed = None
    missing_rate = 0.0
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise DataFormatError(f"invalid JSON: {err}", path=str(meta_path)) from err
        if meta.get("n") is not None and int(meta["n"]) != n:
            raise DataFormatError(
                f"meta n={meta['n']} does not match data rows ({n})",
                path=str(meta_path),
            )
        cluster_count = None if meta.get("k") is None else int(meta["k"])
        seed = None if meta.get("seed") is None else int(meta["seed"])
        missing_rate = float(meta.get("missing_rate") or 0.0)

    mask = mask_values.astype(bool)
    # The mask is authoritative: zero out anything stored at unobserved slots.
    view1[~mask[:, 0], :] = 0.0
    view2[~mask[:, 1], :] = 0.0
    return MultiViewDataset(
        view1=view1,
        view2=view2,
        mask=mask,
        labels=labels,
        cluster_count=cluster_count,
        seed=seed,
        missing_rate=missing_rate,
    )


def _read_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataFormatError("file not found", path=str(path))
    rows: list[list[float]] = []
    width = None
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = stripped.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataFormatError(
                    f"expected {width} columns, found {len(fields)}",
                    path=str(path),
                    line=lineno,
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as err:
                raise DataFormatError(
                    f"non-numeric value: {err}", path=str(path), line=lineno
                ) from err
    if not rows:
        raise DataFormatError("file is empty", path=str(path))
    return np.asarray(rows, dtype=np.float64)
