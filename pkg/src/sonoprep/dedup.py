"""Two-stage frame screening: structural (DCT) then semantic (embedding) dedup.

The visual stage walks each sequence in temporal order and compares every
frame against the most recently retained one, which removes adjacent
near-duplicates in a single O(N) pass. The semantic stage then compares the
survivors (in global deterministic order) against the whole kept set, which
also catches redundancy between temporally distant frames.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn

from .errors import EmbeddingFormatError, InvalidInputError
from .imaging import UltrasoundFrame, resize_area

DCT_BLOCK = 8
STRUCTURAL_DIM = DCT_BLOCK * DCT_BLOCK - 1  # low-frequency block minus the DC term
DEFAULT_DCT_SIZE = 64
STUB_DIM = 32
ZERO_NORM_EPS = 1e-12

EMBEDDING_MAGIC = b"PMEB"
EMBEDDING_VERSION = 1

STAGE_NONE = "none"
STAGE_VISUAL = "visual"
STAGE_SEMANTIC = "semantic"


def dct_feature(frame, size: int = DEFAULT_DCT_SIZE) -> np.ndarray:
    """Low-frequency structural fingerprint of a frame.

    The frame is area-resized to ``size`` x ``size``, transformed with an
    orthonormal 2-D DCT-II, and the top-left 8x8 coefficient block is kept.
    The DC entry is dropped (brightness-offset robustness), leaving 63
    coefficients flattened row-major.
    """
    canon = resize_area(frame, size, size).pixels
    coeffs = dctn(canon, type=2, norm="ortho")
    block = coeffs[:DCT_BLOCK, :DCT_BLOCK].ravel()
    return block[1:].astype(np.float64)


def cosine_similarity(a, b) -> float:
    """Cosine similarity clamped to [-1, 1]; zero-norm inputs yield 0.0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        return 0.0
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def stub_embedding(frame, size: int = DEFAULT_DCT_SIZE) -> np.ndarray:
    """Deterministic stand-in for an external frozen encoder.

    Truncates/pads the structural fingerprint to 32 entries and L2-normalizes
    it. Constant frames produce the zero vector, which downstream similarity
    treats as maximally dissimilar (similarity 0).
    """
    feat = dct_feature(frame, size=size)
    vec = np.zeros(STUB_DIM, dtype=np.float64)
    n = min(STUB_DIM, feat.shape[0])
    vec[:n] = feat[:n]
    norm = float(np.linalg.norm(vec))
    if norm < ZERO_NORM_EPS:
        return np.zeros(STUB_DIM, dtype=np.float64)
    return vec / norm


@dataclass
class DedupEntry:
    """Per-frame screening outcome."""

    id: str
    stage_dropped: str = STAGE_NONE
    keeper_id: str | None = None
    similarity: float | None = None

    @property
    def retained(self) -> bool:
        return self.stage_dropped == STAGE_NONE


@dataclass
class DedupReport:
    """Audit trail of a screening run, including the thresholds applied."""

    entries: list[DedupEntry] = field(default_factory=list)
    threshold_vis: float | None = None
    threshold_sem: float | None = None

    @property
    def retained_ids(self) -> list[str]:
        return [e.id for e in self.entries if e.retained]

    @property
    def dropped_count(self) -> int:
        return sum(1 for e in self.entries if not e.retained)

    @property
    def retained_fraction(self) -> float:
        if not self.entries:
            return 0.0
        return (len(self.entries) - self.dropped_count) / len(self.entries)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "stage_dropped", "keeper_id", "similarity"])
            for e in self.entries:
                sim = "" if e.similarity is None else f"{e.similarity:.6f}"
                writer.writerow([e.id, e.stage_dropped, e.keeper_id or "", sim])


def _check_threshold(value: float, name: str) -> None:
    if not 0.0 < value <= 1.0:
        raise InvalidInputError(f"{name} must be in (0, 1], got {value}")


def visual_screen(
    frames: list[UltrasoundFrame],
    threshold_vis: float,
    *,
    dct_size: int = DEFAULT_DCT_SIZE,
    compare_all: bool = False,
) -> tuple[list[str], list[DedupEntry]]:
    """Greedy structural dedup over one temporally ordered sequence.

    The first frame is always retained. Each later frame is compared to the
    most recently retained frame (or to every retained frame when
    ``compare_all`` is set) and dropped when similarity exceeds the
    threshold. Ties at exactly the threshold are retained.
    """
    _check_threshold(threshold_vis, "threshold_vis")
    if not frames:
        return [], []
    seq_ids = {f.sequence_id for f in frames}
    if len(seq_ids) > 1:
        raise InvalidInputError(f"visual_screen expects one sequence, got {sorted(seq_ids)}")
    order = [f.frame_index for f in frames]
    if order != sorted(order):
        raise InvalidInputError("frames must be sorted by frame_index")

    entries: list[DedupEntry] = []
    kept: list[tuple[str, np.ndarray]] = []
    for frame in frames:
        feat = dct_feature(frame, size=dct_size)
        if not kept:
            kept.append((frame.id, feat))
            entries.append(DedupEntry(id=frame.id))
            continue
        if compare_all:
            sims = [cosine_similarity(feat, kf) for _, kf in kept]
            best = int(np.argmax(sims))
            sim, keeper = sims[best], kept[best][0]
        else:
            keeper, keeper_feat = kept[-1]
            sim = cosine_similarity(feat, keeper_feat)
        if sim > threshold_vis:
            entries.append(
                DedupEntry(id=frame.id, stage_dropped=STAGE_VISUAL, keeper_id=keeper, similarity=sim)
            )
        else:
            kept.append((frame.id, feat))
            entries.append(DedupEntry(id=frame.id))
    return [i for i, _ in kept], entries


def semantic_screen(
    candidates: list[tuple[str, np.ndarray]],
    threshold_sem: float,
) -> tuple[list[str], list[DedupEntry]]:
    """Greedy kept-set dedup over embeddings, in the order given.

    A candidate is retained iff its maximum similarity to every previously
    retained embedding stays at or below the threshold; otherwise it is
    dropped and the argmax keeper recorded.
    """
    _check_threshold(threshold_sem, "threshold_sem")
    entries: list[DedupEntry] = []
    kept_ids: list[str] = []
    kept_vecs: list[np.ndarray] = []
    dim: int | None = None
    first_id: str | None = None
    for cid, vec in candidates:
        vec = np.asarray(vec, dtype=np.float64)
        if dim is None:
            dim, first_id = vec.shape[0], cid
        elif vec.shape[0] != dim:
            raise InvalidInputError(
                f"embedding length mismatch: '{first_id}' has {dim}, '{cid}' has {vec.shape[0]}"
            )
        if not kept_vecs:
            kept_ids.append(cid)
            kept_vecs.append(vec)
            entries.append(DedupEntry(id=cid))
            continue
        sims = [cosine_similarity(vec, kv) for kv in kept_vecs]
        best = int(np.argmax(sims))
        if sims[best] > threshold_sem:
            entries.append(
                DedupEntry(
                    id=cid,
                    stage_dropped=STAGE_SEMANTIC,
                    keeper_id=kept_ids[best],
                    similarity=sims[best],
                )
            )
        else:
            kept_ids.append(cid)
            kept_vecs.append(vec)
            entries.append(DedupEntry(id=cid))
    return kept_ids, entries


def _validate_embedding(eid: str, vec: np.ndarray, dim: int | None) -> int:
    if dim is not None and vec.shape[0] != dim:
        raise EmbeddingFormatError(
            f"embedding '{eid}' has dimension {vec.shape[0]}, expected {dim}"
        )
    if not np.isfinite(vec).all():
        raise EmbeddingFormatError(f"embedding '{eid}' contains non-finite values")
    if float(np.linalg.norm(vec)) < ZERO_NORM_EPS:
        raise EmbeddingFormatError(f"embedding '{eid}' has zero norm")
    return vec.shape[0]


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Load an embedding file (binary 'PMEB' format or the JSON alternative).

    Both formats yield float32 vectors; zero-norm or ragged entries are
    rejected at load.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == EMBEDDING_MAGIC:
        return _load_embeddings_binary(path)
    return _load_embeddings_json(path)


def _load_embeddings_binary(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 13 or data[:4] != EMBEDDING_MAGIC:
        raise EmbeddingFormatError(f"{path}: missing PMEB magic")
    version = data[4]
    if version != EMBEDDING_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    count, dim = struct.unpack_from("<II", data, 5)
    off = 13
    for _ in range(count):
        if off + 2 > len(data):
            raise EmbeddingFormatError(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        eid = data[off : off + id_len].decode("utf-8")
        off += id_len
        end = off + 4 * dim
        if end > len(data):
            raise EmbeddingFormatError(f"{path}: truncated vector for '{eid}'")
        vec = np.frombuffer(data[off:end], dtype="<f4").astype(np.float32)
        off = end
        if eid in out:
            raise EmbeddingFormatError(f"{path}: duplicate id '{eid}'")
        _validate_embedding(eid, vec, dim)
        out[eid] = vec
    return out


def _load_embeddings_json(path) -> dict[str, np.ndarray]:
    try:
        with open(path) as fh:
            records = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EmbeddingFormatError(f"{path}: not a PMEB file and not valid JSON ({exc})") from exc
    if not isinstance(records, list):
        raise EmbeddingFormatError(f"{path}: JSON embeddings must be an array of objects")
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    for rec in records:
        if not isinstance(rec, dict) or "id" not in rec or "values" not in rec:
            raise EmbeddingFormatError(f"{path}: each record needs 'id' and 'values'")
        eid = str(rec["id"])
        vec = np.asarray(rec["values"], dtype=np.float32)
        if vec.ndim != 1:
            raise EmbeddingFormatError(f"{path}: values of '{eid}' must be a flat list")
        if eid in out:
            raise EmbeddingFormatError(f"{path}: duplicate id '{eid}'")
        dim = _validate_embedding(eid, vec, dim)
        out[eid] = vec
    return out


def write_embeddings_binary(path, items: dict[str, np.ndarray]) -> None:
    """Write embeddings in the little-endian 'PMEB' v1 format."""
    ids = list(items)
    dims = {np.asarray(items[i]).shape[0] for i in ids}
    if len(dims) > 1:
        raise EmbeddingFormatError(f"mixed embedding dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(bytes([EMBEDDING_VERSION]))
        fh.write(struct.pack("<II", len(ids), dim))
        for eid in ids:
            raw = eid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(items[eid], dtype="<f4").tobytes())


def write_embeddings_json(path, items: dict[str, np.ndarray]) -> None:
    """Write embeddings in the JSON alternative format."""
    records = [
        {"id": eid, "values": [float(np.float32(v)) for v in np.asarray(vec, dtype=np.float32)]}
        for eid, vec in items.items()
    ]
    with open(path, "w") as fh:
        json.dump(records, fh)
