"""Dense message tensors, keyed records, and the spill file format.

The clustering state is six tensors over L levels of N points:

* similarity s, responsibility rho, availability alpha: (L, N, N) float64
* tau (up-level support), phi (down-level support), c (cluster preference):
  (L, N) float64

Records carry slices of those tensors between pipeline stages. A matrix tag
is sliced one row (node-based orientation) or one column (exemplar-based
orientation) per record; tau/phi/c travel as one full vector per (level, tag).
Spill files are the line-delimited serialization of a record stream and are
the only hand-off between chained jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateKey,
    MissingRecord,
    ShapeMismatch,
    SpillIOFailure,
)

ORIENT_NODE = "N"
ORIENT_EXEMPLAR = "E"

TAG_S = "S"
TAG_ALPHA = "alpha"
TAG_RHO = "rho"
TAG_TAU = "tau"
TAG_PHI = "phi"
TAG_C = "c"
TAG_AUX = "aux"

MATRIX_TAGS = (TAG_S, TAG_ALPHA, TAG_RHO)
VECTOR_TAGS = (TAG_TAU, TAG_PHI, TAG_C)
ALL_TAGS = MATRIX_TAGS + VECTOR_TAGS + (TAG_AUX,)

# Canonical record order inside a spill file: level-major, then tag in the
# fixed enumeration order, then index. Independent of how many workers
# produced the records.
_TAG_ORDER = {tag: i for i, tag in enumerate(ALL_TAGS)}


@dataclass(frozen=True)
class RecordKey:
    """Identity of one record: tensor slice index, 1-based level, tag."""

    index: int
    level: int
    tag: str
    orientation: str

    def sort_key(self) -> tuple[int, int, int]:
        return (self.level, _TAG_ORDER[self.tag], self.index)


@dataclass(frozen=True)
class ScalarPayload:
    """A single value with its source index, self-describing via `kind`."""

    source: int
    kind: str
    value: float


@dataclass
class KeyedRecord:
    key: RecordKey
    value: "np.ndarray | ScalarPayload"


@dataclass
class SimilarityTensor:
    """(L, N, N) similarity stack; entries <= 0, diagonal holds preferences."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ShapeMismatch(
                f"similarity tensor must be (L, N, N), got {v.shape}"
            )
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeMismatch(f"similarity tensor has empty axis: {v.shape}")
        self.values = v

    @property
    def levels(self) -> int:
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, levels: int) -> "SimilarityTensor":
        """Replicate one (N, N) base matrix across `levels` levels."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatch(f"base similarity must be square, got {m.shape}")
        return cls(np.repeat(m[None, :, :], levels, axis=0).copy())

    def copy(self) -> "SimilarityTensor":
        return SimilarityTensor(self.values.copy())


@dataclass
class MessageState:
    """Full message-passing state between iterations."""

    s: SimilarityTensor
    alpha: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    c: np.ndarray
    iteration: int = 0

    def __post_init__(self) -> None:
        lvls, n = self.s.levels, self.s.n
        for name in ("alpha", "rho"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (lvls, n, n):
                raise ShapeMismatch(f"{name} must be {(lvls, n, n)}, got {arr.shape}")
            setattr(self, name, arr)
        for name in ("tau", "phi", "c"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (lvls, n):
                raise ShapeMismatch(f"{name} must be {(lvls, n)}, got {arr.shape}")
            setattr(self, name, arr)

    @property
    def levels(self) -> int:
        return self.s.levels

    @property
    def n(self) -> int:
        return self.s.n

    def copy(self) -> "MessageState":
        return MessageState(
            s=self.s.copy(),
            alpha=self.alpha.copy(),
            rho=self.rho.copy(),
            tau=self.tau.copy(),
            phi=self.phi.copy(),
            c=self.c.copy(),
            iteration=self.iteration,
        )


def init_state(s: SimilarityTensor) -> MessageState:
    """Initial state: alpha = rho = 0, tau = +inf, phi = 0, c = 0."""
    lvls, n = s.levels, s.n
    return MessageState(
        s=s.copy(),
        alpha=np.zeros((lvls, n, n)),
        rho=np.zeros((lvls, n, n)),
        tau=np.full((lvls, n), math.inf),
        phi=np.zeros((lvls, n)),
        c=np.zeros((lvls, n)),
        iteration=0,
    )


def states_equal(a: MessageState, b: MessageState) -> bool:
    """Bitwise equality of every tensor (sign of zero included)."""
    if a.levels != b.levels or a.n != b.n:
        return False
    pairs = [
        (a.s.values, b.s.values),
        (a.alpha, b.alpha),
        (a.rho, b.rho),
        (a.tau, b.tau),
        (a.phi, b.phi),
        (a.c, b.c),
    ]
    return all(x.tobytes() == y.tobytes() for x, y in pairs)


def state_max_abs_diff(a: MessageState, b: MessageState) -> dict[str, float]:
    """Per-tensor max absolute divergence, for cross-backend diffing."""
    out: dict[str, float] = {}
    for name, x, y in (
        ("s", a.s.values, b.s.values),
        ("alpha", a.alpha, b.alpha),
        ("rho", a.rho, b.rho),
        ("tau", a.tau, b.tau),
        ("phi", a.phi, b.phi),
        ("c", a.c, b.c),
    ):
        with np.errstate(invalid="ignore"):
            d = np.abs(x - y)
        d = np.where(np.isnan(d) & (x == y), 0.0, d)  # inf vs inf agrees
        out[name] = float(np.max(d)) if d.size else 0.0
    return out


@dataclass
class AssignmentTable:
    """Chosen exemplar per point per level; levels are 1-based in accessors."""

    exemplars: np.ndarray  # (L, N) int64

    def __post_init__(self) -> None:
        arr = np.asarray(self.exemplars, dtype=np.int64)
        if arr.ndim != 2:
            raise ShapeMismatch(f"exemplar table must be 2-D, got {arr.shape}")
        self.exemplars = arr

    @property
    def levels(self) -> int:
        return int(self.exemplars.shape[0])

    @property
    def n(self) -> int:
        return int(self.exemplars.shape[1])

    def level(self, level: int) -> np.ndarray:
        if not 1 <= level <= self.levels:
            raise ShapeMismatch(f"level {level} outside [1, {self.levels}]")
        return self.exemplars[level - 1]

    def exemplar_set(self, level: int) -> list[int]:
        return sorted(int(j) for j in np.unique(self.level(level)))

    def exemplar_counts(self) -> list[int]:
        return [len(self.exemplar_set(l)) for l in range(1, self.levels + 1)]


def to_records(state: MessageState, orientation: str) -> list[KeyedRecord]:
    """Slice a state into records.

    Exemplar-based records carry matrix columns, node-based records carry
    rows. tau/phi/c produce one vector record per (level, tag) with index 0.
    Record count is 3*L*N + 3*L.
    """
    if orientation not in (ORIENT_NODE, ORIENT_EXEMPLAR):
        raise ShapeMismatch(f"unknown orientation {orientation!r}")
    lvls, n = state.levels, state.n
    recs: list[KeyedRecord] = []
    matrices = ((TAG_S, state.s.values), (TAG_ALPHA, state.alpha), (TAG_RHO, state.rho))
    vectors = ((TAG_TAU, state.tau), (TAG_PHI, state.phi), (TAG_C, state.c))
    for lv in range(1, lvls + 1):
        for tag, tensor in matrices:
            mat = tensor[lv - 1]
            for idx in range(n):
                sl = mat[idx, :] if orientation == ORIENT_NODE else mat[:, idx]
                recs.append(
                    KeyedRecord(RecordKey(idx, lv, tag, orientation), sl.copy())
                )
        for tag, tensor in vectors:
            recs.append(
                KeyedRecord(
                    RecordKey(0, lv, tag, orientation), tensor[lv - 1].copy()
                )
            )
    return recs


def from_records(records: list[KeyedRecord], iteration: int = 0) -> MessageState:
    """Rebuild a MessageState from a complete record stream.

    The stream must hold exactly one record per (index, level, matrix tag)
    and one per (level, vector tag), all in a single orientation. Records
    tagged `aux` are permitted and ignored (they are pipeline side-channels,
    not state).
    """
    body = [r for r in records if r.key.tag != TAG_AUX]
    if not body:
        raise MissingRecord("record stream is empty")
    orientation = body[0].key.orientation
    lvls = max(r.key.level for r in body)
    n = None
    for r in body:
        if r.key.orientation != orientation:
            raise ShapeMismatch(
                f"mixed orientations in stream: {r.key} vs {orientation!r}"
            )
        if not isinstance(r.value, np.ndarray):
            raise ShapeMismatch(f"record {r.key} does not carry a vector")
        if r.key.tag in MATRIX_TAGS:
            if n is None:
                n = int(r.value.shape[0])
            elif int(r.value.shape[0]) != n:
                raise ShapeMismatch(
                    f"record {r.key} has length {r.value.shape[0]}, expected {n}"
                )
    if n is None:
        raise MissingRecord("stream has no matrix records")

    mats = {tag: np.zeros((lvls, n, n)) for tag in MATRIX_TAGS}
    vecs = {tag: np.zeros((lvls, n)) for tag in VECTOR_TAGS}
    seen: set[tuple[int, int, str]] = set()
    for r in body:
        k = r.key
        ident = (k.index, k.level, k.tag)
        if ident in seen:
            raise DuplicateKey(f"duplicate record {ident}")
        seen.add(ident)
        if not 1 <= k.level <= lvls:
            raise ShapeMismatch(f"record {k} has level outside [1, {lvls}]")
        if k.tag in MATRIX_TAGS:
            if not 0 <= k.index < n:
                raise ShapeMismatch(f"record {k} has index outside [0, {n})")
            if orientation == ORIENT_NODE:
                mats[k.tag][k.level - 1, k.index, :] = r.value
            else:
                mats[k.tag][k.level - 1, :, k.index] = r.value
        elif k.tag in VECTOR_TAGS:
            if int(r.value.shape[0]) != n:
                raise ShapeMismatch(
                    f"vector record {k} has length {r.value.shape[0]}, expected {n}"
                )
            vecs[k.tag][k.level - 1, :] = r.value
        else:
            raise ShapeMismatch(f"unknown tag {k.tag!r}")

    for lv in range(1, lvls + 1):
        for tag in MATRIX_TAGS:
            for idx in range(n):
                if (idx, lv, tag) not in seen:
                    raise MissingRecord(f"missing record {(idx, lv, tag)}")
        for tag in VECTOR_TAGS:
            if (0, lv, tag) not in seen:
                raise MissingRecord(f"missing record {(0, lv, tag)}")

    return MessageState(
        s=SimilarityTensor(mats[TAG_S]),
        alpha=mats[TAG_ALPHA],
        rho=mats[TAG_RHO],
        tau=vecs[TAG_TAU],
        phi=vecs[TAG_PHI],
        c=vecs[TAG_C],
        iteration=iteration,
    )


def format_value(v: float) -> str:
    """Shortest round-trip decimal; infinities spelled inf / -inf."""
    f = float(v)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def format_record_line(rec: KeyedRecord) -> str:
    k = rec.key
    if not isinstance(rec.value, np.ndarray):
        raise ShapeMismatch(f"only vector records can be spilled, got {k}")
    vals = ",".join(format_value(x) for x in rec.value)
    return f"{k.orientation}\t{k.index}\t{k.level}\t{k.tag}\t{vals}"


def coalesce_scalar_records(records: list[KeyedRecord]) -> list[KeyedRecord]:
    """Turn per-(index, level) scalar slices of tau/phi/c into vector records.

    Reducers that own a single (index, level) cell emit their tau/phi/c
    values as ScalarPayload records; carrying them in a spill requires the
    one-vector-per-(level, tag) form, so the slices are gathered here. Full
    index coverage 0..N-1 per (level, tag) is required. Vector records pass
    through unchanged.
    """
    vectors: list[KeyedRecord] = []
    pending: dict[tuple[int, str, str], dict[int, float]] = {}
    for r in records:
        if isinstance(r.value, np.ndarray):
            vectors.append(r)
            continue
        k = r.key
        pending.setdefault((k.level, k.tag, k.orientation), {})[k.index] = (
            r.value.value
        )
    sizes = {len(v) for v in pending.values()}
    if len(sizes) > 1:
        raise MissingRecord(
            f"scalar slices cover unequal index sets per (level, tag): {sizes}"
        )
    for (level, tag, orientation), cells in sorted(pending.items()):
        n = len(cells)
        if set(cells) != set(range(n)):
            missing = sorted(set(range(n)) - set(cells))[:3]
            raise MissingRecord(
                f"scalar slices for level {level} tag {tag} miss indices {missing}"
            )
        vec = np.array([cells[i] for i in range(n)], dtype=np.float64)
        vectors.append(KeyedRecord(RecordKey(0, level, tag, orientation), vec))
    return vectors


def sort_records(records: list[KeyedRecord]) -> list[KeyedRecord]:
    return sorted(records, key=lambda r: r.key.sort_key())


def write_spill(records: list[KeyedRecord], path: str) -> int:
    """Write a record stream as a spill file in canonical order.

    Scalar tau/phi/c slices are coalesced into vectors first. Returns the
    number of lines written.
    """
    recs = sort_records(coalesce_scalar_records(records))
    try:
        with open(path, "w", encoding="ascii") as fh:
            for r in recs:
                fh.write(format_record_line(r))
                fh.write("\n")
    except OSError as exc:
        raise SpillIOFailure(f"cannot write spill {path}: {exc}") from exc
    return len(recs)


def parse_record_line(line: str, lineno: int, path: str) -> KeyedRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 5:
        raise SpillIOFailure(
            f"{path}:{lineno}: expected 5 tab-separated fields, got {len(parts)}"
        )
    orientation, index_s, level_s, tag, vals = parts
    if orientation not in (ORIENT_NODE, ORIENT_EXEMPLAR):
        raise SpillIOFailure(f"{path}:{lineno}: bad orientation {orientation!r}")
    if tag not in ALL_TAGS:
        raise SpillIOFailure(f"{path}:{lineno}: bad tag {tag!r}")
    try:
        index = int(index_s)
        level = int(level_s)
        vec = np.array([float(x) for x in vals.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise SpillIOFailure(f"{path}:{lineno}: {exc}") from exc
    return KeyedRecord(RecordKey(index, level, tag, orientation), vec)


def read_spill(path: str) -> list[KeyedRecord]:
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise SpillIOFailure(f"cannot read spill {path}: {exc}") from exc
    return [
        parse_record_line(line, i + 1, path)
        for i, line in enumerate(lines)
        if line.strip()
    ]
