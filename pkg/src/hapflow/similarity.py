"""Data ingestion and similarity construction.

Three input shapes are understood: delimited point files, portable pixmap
images (treated as RGB point clouds), and raw similarity matrices. Each
becomes an (L, N, N) SimilarityTensor: pairwise similarities are the
negative (squared) euclidean distance, the diagonal is overwritten by a
preference strategy, and the same base matrix is replicated across all L
levels. Similarities are non-positive everywhere, always; more negative
diagonal means a point is less willing to act as an exemplar.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidRange,
    ParseError,
    PositiveSimilarity,
    ShapeMismatch,
)
from .tensors import SimilarityTensor

METRIC_NEG_EUCLIDEAN = "neg-euclidean"
METRIC_NEG_SQ_EUCLIDEAN = "neg-sq-euclidean"
METRICS = (METRIC_NEG_EUCLIDEAN, METRIC_NEG_SQ_EUCLIDEAN)

PREF_RANDOM = "random-uniform"
PREF_CONSTANT = "constant"
PREF_MEDIAN = "median-of-similarities"

# Rows per block when filling the pairwise matrix, bounding peak scratch
# memory at roughly block * N * d floats.
_PAIRWISE_BLOCK = 256


@dataclass
class PointSet:
    """N points of uniform dimension, optionally labelled by class."""

    points: np.ndarray
    labels: "list[str] | None" = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionMismatch(
                f"points must be a nonempty (N, d) array, got shape {pts.shape}"
            )
        self.points = pts
        if self.labels is not None:
            if len(self.labels) != pts.shape[0]:
                raise DimensionMismatch(
                    f"{len(self.labels)} labels for {pts.shape[0]} points"
                )
            self.labels = list(self.labels)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass
class PixelGrid:
    """Row-major RGB raster with 8-bit channels."""

    width: int
    height: int
    pixels: np.ndarray  # (width*height, 3) uint8
    variant: str = "P3"  # pixmap flavor it was read from / will be written as

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionMismatch(
                f"image must be at least 1x1, got {self.width}x{self.height}"
            )
        px = np.asarray(self.pixels)
        if px.shape != (self.width * self.height, 3):
            raise DimensionMismatch(
                f"expected {self.width * self.height} RGB triples, got shape {px.shape}"
            )
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise DimensionMismatch("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px
        if self.variant not in ("P3", "P6"):
            raise DimensionMismatch(f"unknown pixmap variant {self.variant!r}")

    @property
    def n(self) -> int:
        return self.width * self.height

    def to_points(self) -> PointSet:
        """Pixels as a point cloud in RGB space, row-major order."""
        return PointSet(self.pixels.astype(np.float64))

    def recolored(self, exemplars: np.ndarray) -> "PixelGrid":
        """New grid where pixel i takes the color of pixel exemplars[i]."""
        e = np.asarray(exemplars, dtype=np.int64)
        if e.shape != (self.n,):
            raise DimensionMismatch(
                f"expected {self.n} exemplar entries, got shape {e.shape}"
            )
        if e.min() < 0 or e.max() >= self.n:
            raise DimensionMismatch("exemplar index outside the pixel range")
        return PixelGrid(self.width, self.height, self.pixels[e], self.variant)


@dataclass(frozen=True)
class PreferenceStrategy:
    """How the similarity diagonal (exemplar willingness) is chosen.

    random-uniform draws one value per point from [lo, hi] with the run's
    seeded generator; constant uses a single value; median-of-similarities
    uses the median off-diagonal similarity. All variants keep the
    diagonal non-positive.
    """

    variant: str
    lo: float = 0.0
    hi: float = 0.0
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.variant == PREF_RANDOM:
            if not (self.lo <= self.hi <= 0.0):
                raise InvalidRange(
                    f"random preference needs lo <= hi <= 0, got [{self.lo}, {self.hi}]"
                )
        elif self.variant == PREF_CONSTANT:
            if self.value > 0.0:
                raise InvalidRange(
                    f"constant preference must be <= 0, got {self.value}"
                )
        elif self.variant != PREF_MEDIAN:
            raise InvalidRange(f"unknown preference variant {self.variant!r}")

    @classmethod
    def parse(cls, text: str) -> "PreferenceStrategy":
        """Parse CLI syntax: random:lo:hi, constant:v, or median."""
        parts = text.split(":")
        try:
            if parts[0] == "random" and len(parts) == 3:
                return cls(PREF_RANDOM, lo=float(parts[1]), hi=float(parts[2]))
            if parts[0] == "constant" and len(parts) == 2:
                return cls(PREF_CONSTANT, value=float(parts[1]))
            if parts[0] == "median" and len(parts) == 1:
                return cls(PREF_MEDIAN)
        except ValueError as exc:
            raise InvalidRange(f"bad preference value in {text!r}: {exc}") from exc
        raise InvalidRange(
            f"cannot parse preference {text!r}; expected "
            "random:lo:hi, constant:v, or median"
        )


def pairwise_similarity(points: np.ndarray, metric: str) -> np.ndarray:
    """(N, N) matrix of negative (squared) euclidean distances, zero diagonal."""
    if metric not in METRICS:
        raise InvalidRange(f"unknown metric {metric!r}; expected one of {METRICS}")
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, _PAIRWISE_BLOCK):
        stop = min(start + _PAIRWISE_BLOCK, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        if metric == METRIC_NEG_EUCLIDEAN:
            out[start:stop] = -np.sqrt(sq)
        else:
            out[start:stop] = -sq
    np.fill_diagonal(out, 0.0)
    return out


def apply_preferences(
    s: SimilarityTensor, pref: PreferenceStrategy, seed: int = 0
) -> SimilarityTensor:
    """Overwrite the diagonal at every level per the strategy.

    random-uniform draws one preference vector and replicates it across
    levels, so the same seed yields the same diagonal regardless of L.
    median-of-similarities is evaluated per level over that level's
    off-diagonal entries.
    """
    out = s.copy()
    n = out.n
    if pref.variant == PREF_RANDOM:
        diag = np.random.default_rng(seed).uniform(pref.lo, pref.hi, size=n)
        for lv in range(out.levels):
            np.fill_diagonal(out.values[lv], diag)
    elif pref.variant == PREF_CONSTANT:
        for lv in range(out.levels):
            np.fill_diagonal(out.values[lv], pref.value)
    else:
        for lv in range(out.levels):
            mat = out.values[lv]
            if n == 1:
                med = 0.0
            else:
                off = mat[~np.eye(n, dtype=bool)]
                med = float(np.median(off))
            np.fill_diagonal(mat, med)
    return out


def similarity_from_points(
    ps: PointSet,
    metric: str,
    levels: int,
    pref: PreferenceStrategy,
    seed: int = 0,
) -> SimilarityTensor:
    """Pairwise similarities replicated across levels, diagonal per pref."""
    if levels < 1:
        raise ShapeMismatch(f"levels must be >= 1, got {levels}")
    base = pairwise_similarity(ps.points, metric)
    tensor = SimilarityTensor.from_matrix(base, levels)
    return apply_preferences(tensor, pref, seed)


def similarity_from_image(
    img: PixelGrid,
    metric: str,
    levels: int,
    pref: PreferenceStrategy,
    seed: int = 0,
) -> SimilarityTensor:
    """Flatten pixels row-major to RGB points, then build as for points."""
    return similarity_from_points(img.to_points(), metric, levels, pref, seed)


def load_points_csv(path: str) -> PointSet:
    """One point per line, comma-separated decimals.

    A final column starting with '#' is a class label; rows must agree on
    whether it is present.
    """
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ParseError(f"cannot read points file {path}: {exc}") from exc
    rows: list[list[float]] = []
    labels: list[str] = []
    labelled: "bool | None" = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        has_label = fields[-1].startswith("#")
        if labelled is None:
            labelled = has_label
        elif labelled != has_label:
            raise ParseError(
                f"{path}:{lineno}: rows disagree on the presence of a label column"
            )
        if has_label:
            labels.append(fields[-1][1:])
            fields = fields[:-1]
        if not fields:
            raise ParseError(f"{path}:{lineno}: no coordinates on this line")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no points found")
    width = len(rows[0])
    for lineno_like, row in enumerate(rows):
        if len(row) != width:
            raise DimensionMismatch(
                f"{path}: point {lineno_like} has {len(row)} coordinates, "
                f"expected {width}"
            )
    return PointSet(np.array(rows), labels if labelled else None)


def _ppm_header_tokens(data: bytes, path: str):
    """Yield (token, end_offset) pairs, skipping whitespace and # comments."""
    i = 0
    n = len(data)
    while i < n:
        ch = data[i : i + 1]
        if ch.isspace():
            i += 1
            continue
        if ch == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        yield data[start:i].decode("ascii", errors="replace"), i
    raise ParseError(f"{path}: unexpected end of file at byte {n}")


def load_ppm(path: str) -> PixelGrid:
    """Read an ASCII (P3) or binary (P6) pixmap with 8-bit channels."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read image {path}: {exc}") from exc
    tokens = _ppm_header_tokens(data, path)

    def next_token(what: str) -> tuple[str, int]:
        try:
            return next(tokens)
        except StopIteration:
            raise ParseError(f"{path}: missing {what}") from None

    magic, _ = next_token("magic number")
    if magic not in ("P3", "P6"):
        raise ParseError(f"{path}: expected P3 or P6, got {magic!r}")
    fields = {}
    header_end = 0
    for name in ("width", "height", "maxval"):
        token, header_end = next_token(name)
        try:
            fields[name] = int(token)
        except ValueError as exc:
            raise ParseError(f"{path}: bad {name} {token!r}") from exc
    if fields["maxval"] != 255:
        raise ParseError(
            f"{path}: only maxval 255 is supported, got {fields['maxval']}"
        )
    width, height = fields["width"], fields["height"]
    if width < 1 or height < 1:
        raise ParseError(f"{path}: bad dimensions {width}x{height}")
    count = width * height * 3

    if magic == "P3":
        values = []
        for token, end in tokens:
            try:
                v = int(token)
            except ValueError as exc:
                raise ParseError(
                    f"{path}: bad sample {token!r} near byte {end}"
                ) from exc
            if not 0 <= v <= 255:
                raise ParseError(f"{path}: sample {v} outside [0, 255]")
            values.append(v)
            if len(values) == count:
                break
        if len(values) != count:
            raise ParseError(
                f"{path}: expected {count} samples, found {len(values)}"
            )
        px = np.array(values, dtype=np.uint8).reshape(-1, 3)
    else:
        # exactly one whitespace byte after the maxval token, then raw samples
        start = header_end + 1
        raw = data[start : start + count]
        if len(raw) != count:
            raise ParseError(
                f"{path}: expected {count} raw bytes after byte {start}, "
                f"found {len(raw)}"
            )
        px = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).copy()
    return PixelGrid(width, height, px, magic)


def write_ppm(grid: PixelGrid, path: str) -> None:
    """Write the grid in its own pixmap variant with maxval 255."""
    header = f"{grid.variant}\n{grid.width} {grid.height}\n255\n"
    if grid.variant == "P3":
        lines = [
            " ".join(str(int(v)) for v in rgb) for rgb in grid.pixels
        ]
        Path(path).write_text(header + "\n".join(lines) + "\n", encoding="ascii")
    else:
        Path(path).write_bytes(header.encode("ascii") + grid.pixels.tobytes())


def load_similarity_matrix(path: str) -> SimilarityTensor:
    """Read a raw tensor: header line `N L`, then L blocks of N rows.

    Every value must be <= 0; the diagonal carries preferences as-is.
    """
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ParseError(f"cannot read similarity file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError(f"{path}:1: header must be `N L`, got {lines[0]!r}")
    try:
        n, levels = int(head[0]), int(head[1])
    except ValueError as exc:
        raise ParseError(f"{path}:1: {exc}") from exc
    if n < 1 or levels < 1:
        raise ParseError(f"{path}:1: N and L must be >= 1, got {n} {levels}")
    body = lines[1:]
    if len(body) != n * levels:
        raise ParseError(
            f"{path}: expected {n * levels} matrix rows, found {len(body)}"
        )
    values = np.empty((levels, n, n), dtype=np.float64)
    for pos, line in enumerate(body):
        lineno = pos + 2
        fields = line.split()
        if len(fields) != n:
            raise ParseError(
                f"{path}:{lineno}: expected {n} values, got {len(fields)}"
            )
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        for col, v in enumerate(row):
            if v > 0.0:
                raise PositiveSimilarity(
                    f"{path}:{lineno}: similarity {v} at column {col} is > 0"
                )
        values[pos // n, pos % n, :] = row
    return SimilarityTensor(values)
