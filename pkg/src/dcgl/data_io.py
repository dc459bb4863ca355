"""Dataset loading, normalization, synthetic benchmarks, and run configuration.

File formats
------------
* CSV: comma-separated, UTF-8, optional header row (detected by a non-numeric
  first line), optional trailing integer label column.
* Binary container: little-endian header ``{magic b"DCGL", u32 n, u32 m,
  u8 has_labels}`` followed by the row-major f64 matrix and, when present,
  ``n`` i32 labels.
* Config: JSON mirroring the :class:`RunConfig` fields (the ``lam`` field is
  spelled ``lambda`` on disk).

Everything is stored as 64-bit floats; all functions are pure.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

MAGIC_DATA = b"DCGL"


@dataclass
class DataMatrix:
    """An n x m sample matrix with optional ground-truth labels.

    Labels are evaluation-only; the cluster count c is always supplied
    explicitly because the pipeline itself is unsupervised.
    """

    X: np.ndarray
    c: int
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def validate(self):
        if self.X.ndim != 2 or self.X.shape[0] == 0 or self.X.shape[1] == 0:
            raise DataError("data matrix must be 2-D and non-empty")
        if not np.isfinite(self.X).all():
            raise DataError("data matrix contains non-finite entries")
        if not (2 <= self.c <= self.n):
            raise DataError(f"need n >= c >= 2, got n={self.n}, c={self.c}")
        if self.labels is not None:
            if len(self.labels) != self.n:
                raise DataError("label vector length does not match sample count")
            if self.labels.min() < 0 or self.labels.max() >= self.c:
                raise DataError(
                    f"label out of range: values must lie in [0, {self.c})"
                )
        return self


# Default loss weights / schedule follow the published recommendation:
# alpha=1, beta=1e3, gamma=2e3, tau=0.5, lambda=0.2, t=6, iter=30.
@dataclass
class RunConfig:
    """All knobs of a training run, including ablation switches."""

    c: int = 0                    # cluster count, required, no sensible default
    k_init: int = 5               # initial neighbor count
    t: int = 6                    # epochs per neighbor-growth stage
    iter: int = 30                # maximum epochs
    alpha: float = 1.0            # graph-learning loss weight
    beta: float = 1e3             # cluster-contrastive loss weight
    gamma: float = 2e3            # Frobenius penalty inside the graph loss
    tau: float = 0.5              # contrastive temperature
    lam: float = 0.2              # diffusion transport (restart) rate
    l: int = 128                  # latent dimension
    hidden: int = 256             # GCN hidden width
    hidden_ae: int = 512          # auto-encoder hidden width
    lr: float = 1e-3              # Adam step size
    seed: int = 0
    disable_FL: bool = False          # drop feature-level contrastive loss
    disable_CL: bool = False          # drop cluster-level loss + siamese GCNs
    disable_FL_guidance: bool = False  # negatives = all other-branch rows
    disable_CL_guidance: bool = False  # anchors = indicator rows, not centroids
    cl_inside_log: bool = False   # move the intra-view term into the denominator

    # JSON spells "lambda"; the attribute cannot.
    _ALIASES = {"lambda": "lam"}

    def validate(self):
        if self.c < 2:
            raise ConfigError("c must be >= 2")
        if self.k_init < 1 or self.t < 1 or self.iter < 1:
            raise ConfigError("k_init, t, and iter must be >= 1")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if not (0 < self.lam <= 1):
            raise ConfigError("lambda must lie in (0, 1]")
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ConfigError("alpha, beta, gamma must be >= 0")
        if self.l < 1 or self.hidden < 1 or self.hidden_ae < 1:
            raise ConfigError("layer widths must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in d.items():
            name = cls._ALIASES.get(key, key)
            if name not in fields or name.startswith("_"):
                raise ConfigError(f"unknown config key: {key!r}")
            kwargs[name] = value
        return cls(**kwargs)


def load_config(path) -> RunConfig:
    """Parse a JSON config file into a validated RunConfig."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig.from_dict(raw).validate()


def save_config(cfg: RunConfig, path):
    """Write the fully resolved config (every default echoed) as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _is_numeric_line(line: str) -> bool:
    for cell in line.split(","):
        try:
            float(cell)
        except ValueError:
            return False
    return True


def load_dataset(path, fmt: str, has_labels: bool = False, c: int | None = None) -> DataMatrix:
    """Load a dataset from ``csv`` or ``bin`` format.

    CSV rows are samples; when ``has_labels`` the last column holds integer
    labels. The binary container is self-describing, so ``has_labels`` is
    ignored for it. ``c`` is inferred from labels when omitted.
    Returns the raw (unnormalized) matrix.
    """
    if fmt == "csv":
        X, labels = _load_csv(path, has_labels)
    elif fmt == "bin":
        X, labels = _load_binary(path)
    else:
        raise DataError(f"unknown dataset format: {fmt!r}")
    if c is None:
        if labels is None:
            raise DataError("c is required when the dataset carries no labels")
        c = int(labels.max()) + 1
    return DataMatrix(X=X, c=int(c), labels=labels).validate()


def load_matrix(path, fmt: str, has_labels: bool = False):
    """Load a raw matrix (and labels, when present) without the DataMatrix
    cluster-count validation; used for plotting arbitrary saved matrices."""
    if fmt == "csv":
        return _load_csv(path, has_labels)
    if fmt == "bin":
        return _load_binary(path)
    raise DataError(f"unknown matrix format: {fmt!r}")


def _load_csv(path, has_labels):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}")
    if lines and not _is_numeric_line(lines[0]):
        lines = lines[1:]  # optional header row
    if not lines:
        raise DataError("no samples")
    rows = []
    width = None
    for idx, line in enumerate(lines):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(f"ragged row at line {idx + 1}: expected {width} cells")
        try:
            rows.append([float(cell) for cell in cells])
        except ValueError as exc:
            raise DataError(f"non-numeric cell at line {idx + 1}: {exc}")
    M = np.asarray(rows, dtype=np.float64)
    if not has_labels:
        return M, None
    if M.shape[1] < 2:
        raise DataError("labeled csv needs at least one feature column")
    raw_labels = M[:, -1]
    if not np.all(raw_labels == np.round(raw_labels)):
        raise DataError("label column not integral")
    return np.ascontiguousarray(M[:, :-1]), raw_labels.astype(np.int64)


def _load_binary(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}")
    header = struct.calcsize("<4sIIB")
    if len(blob) < header:
        raise DataError("binary container truncated (no header)")
    magic, n, m, has_labels = struct.unpack_from("<4sIIB", blob, 0)
    if magic != MAGIC_DATA:
        raise DataError(f"bad magic {magic!r}, expected {MAGIC_DATA!r}")
    if n == 0 or m == 0:
        raise DataError("no samples")
    need = header + 8 * n * m + (4 * n if has_labels else 0)
    if len(blob) != need:
        raise DataError(f"binary container has {len(blob)} bytes, expected {need}")
    X = np.frombuffer(blob, dtype="<f8", count=n * m, offset=header).reshape(n, m)
    labels = None
    if has_labels:
        labels = np.frombuffer(
            blob, dtype="<i4", count=n, offset=header + 8 * n * m
        ).astype(np.int64)
    return X.copy(), labels


def save_matrix(path, X: np.ndarray, labels=None):
    """Write a matrix (and optional labels) in the binary container format."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, m = X.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIB", MAGIC_DATA, n, m, 1 if labels is not None else 0))
        fh.write(X.astype("<f8").tobytes())
        if labels is not None:
            fh.write(np.asarray(labels, dtype="<i4").tobytes())


def l2_normalize(data: DataMatrix) -> DataMatrix:
    """Scale every sample to unit Euclidean norm. Zero rows are rejected."""
    norms = np.linalg.norm(data.X, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise DataError(f"zero-norm row at index {zero[0]}: cannot normalize")
    X = data.X / norms[:, None]
    return DataMatrix(X=X, c=data.c, labels=data.labels)


def make_blobs(n: int, c: int, m: int, sigma: float, seed: int) -> DataMatrix:
    """Sample c isotropic Gaussian clusters with well-separated centers.

    Centers sit on a common sphere whose radius is chosen so the minimum
    pairwise center distance is exactly 10*sigma; equal norms keep the
    clusters separated after a later row-wise l2 normalization as well.
    Labels are assigned round-robin, so any remainder of n/c spreads evenly.
    """
    if sigma <= 0:
        raise DataError("sigma must be > 0")
    if c < 2:
        raise DataError("need at least 2 clusters")
    if n < c:
        raise DataError("need n >= c")
    rng = np.random.default_rng(seed)
    dirs = np.empty((c, m))
    for i in range(c):
        for _ in range(100):
            v = rng.standard_normal(m)
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                cand = v / nv
                # re-draw directions that collide with an earlier one
                if i == 0 or np.min(np.linalg.norm(dirs[:i] - cand, axis=1)) > 1e-6:
                    dirs[i] = cand
                    break
        else:
            raise DataError(f"could not draw {c} distinct center directions in {m}-D")
    gaps = [np.linalg.norm(dirs[i] - dirs[j]) for i in range(c) for j in range(i + 1, c)]
    radius = 10.0 * sigma / min(gaps)
    centers = radius * dirs
    labels = np.arange(n, dtype=np.int64) % c
    X = centers[labels] + sigma * rng.standard_normal((n, m))
    return DataMatrix(X=X, c=c, labels=labels).validate()
