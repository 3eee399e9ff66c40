"""Word-vector table: the only feature source for aspect classifiers and
similarity baselines.

The on-disk format is the common text release format: one word per line
followed by its vector components, space separated, with an optional
"count dim" header line.  Tokens are matched case-sensitively after
trimming; a lookup miss is an error, never a silent zero vector.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError, FormatError, VocabularyError


class EmbeddingTable:
    """Immutable token -> fixed-dimension vector map."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        if dim <= 0:
            raise DataError(f"embedding dimension must be positive, got {dim}")
        self._dim = int(dim)
        self._vectors = {}
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (self._dim,):
                raise DataError(
                    f"vector for {token!r} has shape {arr.shape}, expected ({dim},)"
                )
            self._vectors[token] = arr

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, token):
        return token in self._vectors

    def __getitem__(self, token) -> np.ndarray:
        try:
            return self._vectors[token]
        except KeyError:
            raise VocabularyError(
                f"token {token!r} is not in the embedding vocabulary"
            ) from None

    def get(self, token, default=None):
        """Absent tokens return default, distinguishable from any vector."""
        return self._vectors.get(token, default)

    def tokens(self):
        return self._vectors.keys()


def _looks_like_header(cells) -> bool:
    if len(cells) != 2:
        return False
    try:
        int(cells[0]), int(cells[1])
    except ValueError:
        return False
    return True


def load_embeddings(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse a text embedding file into an EmbeddingTable.

    The dimension comes from expected_dim when given, else from the header
    line when present, else from the first data row.  Every row must match
    it; a mismatch reports the offending 1-based line number.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = expected_dim
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            cells = raw.split()
            if not cells:
                continue
            if lineno == 1 and _looks_like_header(cells):
                header_dim = int(cells[1])
                if dim is None:
                    dim = header_dim
                elif header_dim != dim:
                    raise FormatError(
                        f"{path}:1: header declares dimension {header_dim}, "
                        f"expected {dim}"
                    )
                continue
            token = cells[0]
            try:
                vec = np.array([float(c) for c in cells[1:]], dtype=float)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad float: {exc}") from None
            if dim is None:
                dim = vec.size
                if dim == 0:
                    raise FormatError(f"{path}:{lineno}: row has no vector values")
            if vec.size != dim:
                raise FormatError(
                    f"{path}:{lineno}: row has {vec.size} values, expected {dim}"
                )
            vectors[token] = vec
    if not vectors:
        raise DataError(f"{path}: no embedding rows found")
    return EmbeddingTable(dim, vectors)


def cosine(u, v) -> float:
    """Cosine similarity u.v / (|u||v|); zero-norm inputs are an error."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DataError(f"cosine: shape mismatch {u.shape} vs {v.shape}")
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine is undefined for a zero-norm vector")
    return float(u @ v) / (nu * nv)


def nearest_neighbors(query, k, candidates, table: EmbeddingTable):
    """Top-k candidates by cosine similarity to query, descending.

    Ties break lexicographically; candidates missing from the table are
    skipped.  Returns a list of (token, similarity).
    """
    if k < 1:
        raise DataError(f"k must be positive, got {k}")
    qvec = table[query]
    candidates = list(candidates)
    scored = []
    for cand in candidates:
        cvec = table.get(cand)
        if cvec is None:
            continue
        scored.append((cand, cosine(qvec, cvec)))
    if not scored:
        raise DataError(
            f"none of the {len(candidates)} candidates are in the "
            "embedding vocabulary"
        )
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
