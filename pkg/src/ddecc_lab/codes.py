"""Binary linear block codes over GF(2).

Matrices keep both a dense ``uint8`` view and a packed view (rows as
little-endian ``uint64`` words) so syndromes reduce to AND + popcount.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_hard_words, check_soft_words
from .exceptions import CodeDefinitionError, InputError, ParseError


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, n) 0/1 array into (rows, ceil(n/64)) uint64 words."""
    rows, n = bits.shape
    n_words = max(1, -(-n // 64))
    packed = np.packbits(bits.astype(np.uint8, copy=False), axis=1, bitorder="little")
    padded = np.zeros((rows, n_words * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    return padded.view("<u8")


class BinaryMatrix:
    """Immutable matrix over GF(2)."""

    __slots__ = ("_dense", "_packed")

    def __init__(self, bits):
        arr = np.array(bits)
        if arr.ndim != 2:
            raise InputError(f"binary matrix must be 2-D, got shape {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise InputError("binary matrix entries must be 0 or 1")
        dense = arr.astype(np.uint8)
        dense.setflags(write=False)
        packed = _pack_rows(dense)
        packed.setflags(write=False)
        self._dense = dense
        self._packed = packed

    @property
    def rows(self) -> int:
        return self._dense.shape[0]

    @property
    def cols(self) -> int:
        return self._dense.shape[1]

    @property
    def shape(self):
        return self._dense.shape

    @property
    def dense(self) -> np.ndarray:
        """Read-only (rows, cols) uint8 view."""
        return self._dense

    @property
    def packed(self) -> np.ndarray:
        """Read-only (rows, words) uint64 view, bit j of word w is column 64*w + j."""
        return self._packed

    @property
    def bits(self) -> np.ndarray:
        """Row-major flat sequence of entries."""
        return self._dense.ravel()

    def density(self) -> float:
        return float(self._dense.mean()) if self._dense.size else 0.0

    def __eq__(self, other):
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._dense, other._dense))

    def __hash__(self):
        return hash((self.shape, self._dense.tobytes()))

    def __repr__(self):
        return f"BinaryMatrix(rows={self.rows}, cols={self.cols}, ones={int(self._dense.sum())})"


# ---------------------------------------------------------------------------
# GF(2) linear algebra


def _row_reduce(H: np.ndarray):
    """Reduced row echelon form over GF(2).

    Returns the reduced matrix (rank rows kept) and the pivot columns.
    """
    A = H.astype(bool).copy()
    m, n = A.shape
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        others = np.flatnonzero(A[:, c])
        others = others[others != r]
        A[others] ^= A[r]
        pivots.append(c)
        r += 1
    return A[:r].astype(np.uint8), pivots


def gf2_rank(H) -> int:
    dense = H.dense if isinstance(H, BinaryMatrix) else np.asarray(H, dtype=np.uint8)
    return len(_row_reduce(dense)[1])


def derive_generator(H: BinaryMatrix):
    """Generator matrix for the null space of ``H``.

    Gaussian elimination with column pivoting. ``G`` is returned in the
    original column order of ``H``; ``column_permutation`` lists the message
    (free) columns first, then the pivot columns, so that
    ``G.dense[:, column_permutation]`` is ``[I_k | P]``.
    """
    if not isinstance(H, BinaryMatrix):
        H = BinaryMatrix(H)
    n = H.cols
    R, pivots = _row_reduce(H.dense)
    rank = len(pivots)
    k = n - rank
    if k <= 0:
        raise CodeDefinitionError(f"k must be > 0: H has rank {rank} on n={n} columns")
    free = [c for c in range(n) if c not in set(pivots)]
    G = np.zeros((k, n), dtype=np.uint8)
    G[np.arange(k), free] = 1
    # pivot bit of row i equals the sum of free bits selected by R[i, free]
    G[:, pivots] = R[:, free].T
    perm = np.array(free + list(pivots), dtype=np.int64)
    return BinaryMatrix(G), perm


# ---------------------------------------------------------------------------
# Codes


@dataclass(frozen=True)
class LinearCode:
    """Binary linear code defined by a parity-check matrix.

    Redundant parity rows are accepted: ``k`` is inferred as ``n - rank(H)``.
    Build instances with :meth:`from_parity_check` or :func:`load_code`.
    """

    name: str
    n: int
    k: int
    H: BinaryMatrix
    G: BinaryMatrix
    column_permutation: np.ndarray = field(repr=False)
    rank: int = 0
    source: str = ""

    @classmethod
    def from_parity_check(cls, H, name=None, k=None, source=""):
        if not isinstance(H, BinaryMatrix):
            H = BinaryMatrix(H)
        n = H.cols
        rank = gf2_rank(H)
        if k is not None and rank != n - k:
            raise CodeDefinitionError(
                f"declared k={k} needs rank(H)={n - k}, but rank(H)={rank}"
            )
        G, perm = derive_generator(H)
        perm.setflags(write=False)
        inferred_k = n - rank
        return cls(
            name=name or f"code({n},{inferred_k})",
            n=n,
            k=inferred_k,
            H=H,
            G=G,
            column_permutation=perm,
            rank=rank,
            source=source,
        )

    @property
    def m(self) -> int:
        """Number of parity-check rows (may exceed n - k)."""
        return self.H.rows

    @property
    def rate(self) -> float:
        return self.k / self.n

    def encode(self, messages) -> np.ndarray:
        """Map (B, k) message bits to (B, n) codewords, ``u @ G mod 2``."""
        U = check_hard_words(messages, self.k, name="messages")
        return ((U.astype(np.int64) @ self.G.dense.astype(np.int64)) & 1).astype(np.uint8)

    def syndrome_bits(self, words) -> np.ndarray:
        """(B, m) syndrome bits of (B, n) hard words, via packed popcount."""
        W = check_hard_words(words, self.n)
        return _packed_syndrome(self.H.packed, _pack_rows(W))

    def syndrome_weight(self, words) -> np.ndarray:
        return self.syndrome_bits(words).sum(axis=1, dtype=np.int64)

    def is_codeword(self, words) -> np.ndarray:
        return self.syndrome_weight(words) == 0

    def info(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "rank": self.rank,
            "density": self.H.density(),
        }


def _packed_syndrome(H_packed: np.ndarray, W_packed: np.ndarray) -> np.ndarray:
    counts = np.bitwise_count(W_packed[:, None, :] & H_packed[None, :, :])
    return (counts.sum(axis=2, dtype=np.int64) & 1).astype(np.uint8)


@dataclass(frozen=True)
class Syndrome:
    bits: np.ndarray
    weight: int


def syndrome(code: LinearCode, w) -> Syndrome:
    """Syndrome of a single hard word."""
    w = np.asarray(w)
    if w.ndim != 1 or w.shape[0] != code.n:
        raise InputError(f"word length {w.shape[-1] if w.ndim else 0} != code length {code.n}")
    bits = code.syndrome_bits(w[None, :])[0]
    return Syndrome(bits=bits, weight=int(bits.sum()))


def hard_decision(x) -> np.ndarray:
    """Bit 0 for non-negative soft values, bit 1 for negative ones.

    Accepts a single word or a batch; the output has the input's shape.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        check_soft_words(arr)  # raises NumericError
    return (arr < 0).astype(np.uint8)


def random_codeword(code: LinearCode, rng, size=None) -> np.ndarray:
    """Uniformly random codeword(s) ``u @ G`` with ``u`` uniform over {0,1}^k."""
    shape = (1 if size is None else size, code.k)
    U = rng.integers(0, 2, size=shape, dtype=np.uint8)
    words = code.encode(U)
    return words[0] if size is None else words


# ---------------------------------------------------------------------------
# File formats


def _numbered_lines(text):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield i, line


def _ints(line_no, line):
    out = []
    for j, tok in enumerate(line.split(), start=1):
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"expected integer, got {tok!r}", line_no, j) from None
    return out


def parse_alist(text: str) -> BinaryMatrix:
    """Parse an alist file.

    Layout: ``n m`` / ``max_col_deg max_row_deg`` / n column degrees / m row
    degrees / n column lists / m row lists. Indices are 1-based; zero entries
    pad short lists and are ignored.
    """
    lines = list(_numbered_lines(text))
    if len(lines) < 4:
        raise ParseError("alist needs at least 4 header lines", len(lines) + 1)
    it = iter(lines)

    def take(expected, what):
        try:
            ln, line = next(it)
        except StopIteration:
            raise ParseError(f"unexpected end of file while reading {what}", len(text.splitlines()) + 1) from None
        vals = _ints(ln, line)
        if expected is not None and len(vals) != expected:
            raise ParseError(f"{what}: expected {expected} values, got {len(vals)}", ln)
        return ln, vals

    ln, (n, m) = take(2, "dimensions")
    if n <= 0 or m <= 0:
        raise ParseError(f"dimensions must be positive, got n={n} m={m}", ln)
    ln, (max_col, max_row) = take(2, "max degrees")
    ln_cd, col_deg = take(n, "column degrees")
    ln_rd, row_deg = take(m, "row degrees")
    for degs, bound, ln_d, what in ((col_deg, max_col, ln_cd, "column"), (row_deg, max_row, ln_rd, "row")):
        for j, d in enumerate(degs, start=1):
            if d < 0 or d > bound:
                raise ParseError(f"{what} degree {d} outside [0, {bound}]", ln_d, j)

    def read_lists(count, degs, max_deg, limit, what):
        lists = []
        for i in range(count):
            ln, vals = take(None, f"{what} list {i + 1}")
            if len(vals) > max_deg:
                raise ParseError(
                    f"{what} list has {len(vals)} entries, exceeds declared max degree {max_deg}", ln
                )
            nonzero = [v != 0 for v in vals]
            if any(b and not a for a, b in zip(nonzero, nonzero[1:])):
                raise ParseError(f"zero padding must trail the {what} list", ln)
            idx = [v for v in vals if v != 0]
            for j, v in enumerate(idx, start=1):
                if v < 1 or v > limit:
                    raise ParseError(f"index {v} out of range 1..{limit}", ln, j)
            if len(set(idx)) != len(idx):
                raise ParseError(f"duplicate index in {what} list", ln)
            if len(idx) != degs[i]:
                raise ParseError(
                    f"{what} list has {len(idx)} indices but declared degree is {degs[i]}", ln
                )
            lists.append((ln, idx))
        return lists

    cols = read_lists(n, col_deg, max_col, m, "column")
    rows = read_lists(m, row_deg, max_row, n, "row")

    H = np.zeros((m, n), dtype=np.uint8)
    for c, (_, idx) in enumerate(cols):
        for r in idx:
            H[r - 1, c] = 1
    for r, (ln, idx) in enumerate(rows):
        from_rows = np.zeros(n, dtype=np.uint8)
        from_rows[np.array(idx, dtype=np.int64) - 1] = 1
        if not np.array_equal(from_rows, H[r]):
            raise ParseError(f"row list {r + 1} disagrees with the column lists", ln)
    extra = next(it, None)
    if extra is not None:
        raise ParseError("trailing content after row lists", extra[0])
    return BinaryMatrix(H)


def format_alist(H: BinaryMatrix) -> str:
    dense = H.dense
    m, n = dense.shape
    col_lists = [list(np.flatnonzero(dense[:, c]) + 1) for c in range(n)]
    row_lists = [list(np.flatnonzero(dense[r]) + 1) for r in range(m)]
    max_col = max((len(c) for c in col_lists), default=0)
    max_row = max((len(r) for r in row_lists), default=0)

    def fmt(vals, width):
        return " ".join(str(v) for v in list(vals) + [0] * (width - len(vals)))

    out = [f"{n} {m}", f"{max_col} {max_row}"]
    out.append(" ".join(str(len(c)) for c in col_lists))
    out.append(" ".join(str(len(r)) for r in row_lists))
    out.extend(fmt(c, max_col) for c in col_lists)
    out.extend(fmt(r, max_row) for r in row_lists)
    return "\n".join(out) + "\n"


def parse_dense(text: str) -> BinaryMatrix:
    """Parse whitespace-separated 0/1 rows; ``#`` lines are comments."""
    rows = []
    width = None
    for ln, line in _numbered_lines(text):
        if line.startswith("#"):
            continue
        toks = line.split()
        row = []
        for j, tok in enumerate(toks, start=1):
            if tok not in ("0", "1"):
                raise ParseError(f"non-binary token {tok!r}", ln, j)
            row.append(int(tok))
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged row: {len(row)} entries, expected {width}", ln)
        rows.append(row)
    if not rows:
        raise ParseError("no matrix rows found", 1)
    return BinaryMatrix(np.array(rows, dtype=np.uint8))


def format_dense(H: BinaryMatrix, comment=None) -> str:
    out = []
    if comment:
        out.extend(f"# {c}" for c in comment.splitlines())
    out.extend(" ".join(str(int(b)) for b in row) for row in H.dense)
    return "\n".join(out) + "\n"


def load_matrix(path, fmt=None) -> BinaryMatrix:
    """Read a parity-check matrix; format chosen by ``fmt`` or the file suffix."""
    path = Path(path)
    text = path.read_text()
    fmt = fmt or ("alist" if path.suffix.lower() == ".alist" else "dense")
    if fmt == "alist":
        return parse_alist(text)
    if fmt == "dense":
        return parse_dense(text)
    raise InputError(f"unknown matrix format {fmt!r}")


def load_code(path, fmt=None, name=None) -> LinearCode:
    path = Path(path)
    H = load_matrix(path, fmt)
    return LinearCode.from_parity_check(H, name=name or path.stem, source=str(path))


def hamming_7_4() -> LinearCode:
    """Hamming(7,4) with column j holding the binary expansion of j (MSB in row 0)."""
    H = np.array([[(j >> (2 - r)) & 1 for j in range(1, 8)] for r in range(3)], dtype=np.uint8)
    return LinearCode.from_parity_check(H, name="Hamming(7,4)", source="builtin")
