"""Prime-field linear algebra and the interference-aware decodability test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

MERSENNE31 = 2**31 - 1


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in (2, 3, 5, 7, 11, 13):
        if n % d == 0:
            return n == d
    return all(n % d for d in range(17, math.isqrt(n) + 1, 2))


@dataclass(frozen=True)
class FieldSpec:
    modulus: int = MERSENNE31

    def __post_init__(self) -> None:
        # products of two residues must fit in a signed 64-bit word
        if self.modulus > MERSENNE31:
            raise ValueError(f"modulus {self.modulus} exceeds 2^31 - 1")
        if not is_prime(self.modulus):
            raise ValueError(f"modulus {self.modulus} is not prime")

    def random_nonzero(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.modulus == 2:
            return np.ones(size, dtype=np.int64)
        return rng.integers(1, self.modulus, size=size, dtype=np.int64)

    def random(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.modulus, size=size, dtype=np.int64)


@numba.njit(cache=True)
def _inv(v, q):
    result = 1
    base = v % q
    e = q - 2
    while e > 0:
        if e & 1:
            result = result * base % q
        base = base * base % q
        e >>= 1
    return result


@numba.njit(cache=True)
def _echelon_counts(A, q, split):
    """Row-reduce A in place over GF(q); return (pivots in columns < split, rank)."""
    rows, cols = A.shape
    r = 0
    first = 0
    for c in range(cols):
        if r == rows:
            break
        piv = -1
        for i in range(r, rows):
            if A[i, c] != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(c, cols):
                t = A[r, j]
                A[r, j] = A[piv, j]
                A[piv, j] = t
        inv = _inv(A[r, c], q)
        for j in range(c, cols):
            A[r, j] = A[r, j] * inv % q
        for i in range(r + 1, rows):
            f = A[i, c]
            if f != 0:
                g = q - f
                for j in range(c, cols):
                    if A[r, j] != 0:
                        A[i, j] = (A[i, j] + g * A[r, j]) % q
        r += 1
        if c < split:
            first += 1
    return first, r


@numba.njit(cache=True)
def _insert_row(B, has, row, q):
    """Reduce ``row`` against echelon basis B; store it if independent.

    B[c] holds the basis vector whose leading 1 sits in column c.  Returns the
    new pivot column or -1 when the row was dependent.
    """
    n = row.shape[0]
    for c in range(n):
        v = row[c]
        if v == 0:
            continue
        if has[c]:
            g = q - v
            for j in range(c, n):
                b = B[c, j]
                if b != 0:
                    row[j] = (row[j] + g * b) % q
        else:
            inv = _inv(v, q)
            for j in range(c, n):
                B[c, j] = row[j] * inv % q
            has[c] = True
            return c
    return -1


@numba.njit(cache=True)
def _gf2_rank_packed(W, ncols):
    rows, words = W.shape
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        w = c >> 6
        bit = np.uint64(1) << np.uint64(c & 63)
        piv = -1
        for i in range(r, rows):
            if W[i, w] & bit:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for k in range(w, words):
                t = W[r, k]
                W[r, k] = W[piv, k]
                W[piv, k] = t
        for i in range(r + 1, rows):
            if W[i, w] & bit:
                for k in range(w, words):
                    W[i, k] ^= W[r, k]
        r += 1
    return r


def pack_gf2(A: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into little-endian uint64 words per row."""
    A = np.asarray(A, dtype=np.uint8) & 1
    rows, cols = A.shape
    words = max(1, (cols + 63) // 64)
    padded = np.zeros((rows, words * 64), dtype=np.uint8)
    padded[:, :cols] = A
    bytes_ = np.packbits(padded, axis=1, bitorder="little")
    return bytes_.view(np.uint64).reshape(rows, words).copy()


def _as_matrix(rows, ncols: int | None = None) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        return rows.astype(np.int64, copy=True).reshape(rows.shape[0], -1)
    rows = list(rows)
    if not rows:
        return np.zeros((0, ncols or 0), dtype=np.int64)
    return np.array(rows, dtype=np.int64)


def rank(rows, fld: FieldSpec = FieldSpec()) -> int:
    A = _as_matrix(rows) % fld.modulus
    if A.size == 0:
        return 0
    if fld.modulus == 2:
        return int(_gf2_rank_packed(pack_gf2(A), A.shape[1]))
    return int(_echelon_counts(A, fld.modulus, 0)[1])


class Echelon:
    """Incrementally maintained row-echelon basis over GF(q).

    Columns are visited in the order given by ``order``; pivots falling in the
    first ``split`` visited columns are counted separately.  With the
    interfering columns visited first, that count equals the rank of the
    interference part and the remainder is the decodable dimension.
    """

    def __init__(self, ncols: int, q: int, order: np.ndarray | None = None, split: int = 0):
        self.q = q
        self.ncols = ncols
        self.order = np.arange(ncols) if order is None else np.asarray(order)
        self.split = split
        self.B = np.zeros((ncols, ncols), dtype=np.int64)
        self.has = np.zeros(ncols, dtype=np.bool_)
        self.rank = 0
        self.first = 0

    def insert(self, row: np.ndarray) -> bool:
        r = np.asarray(row, dtype=np.int64)[self.order] % self.q
        c = _insert_row(self.B, self.has, r, self.q)
        if c < 0:
            return False
        self.rank += 1
        if c < self.split:
            self.first += 1
        return True

    @property
    def second(self) -> int:
        return self.rank - self.first


@dataclass
class EquationStore:
    """Observed coefficient rows at one receiver; Tx1 columns precede Tx2 columns."""

    receiver_id: int
    m1: int
    m2: int
    rows: list = field(default_factory=list)
    slot_ids: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.m1 + self.m2

    def add(self, row: np.ndarray, slot: int) -> None:
        row = np.asarray(row, dtype=np.int64)
        if row.shape != (self.width,):
            raise ValueError(f"row length {row.shape} != {self.width}")
        self.rows.append(row)
        self.slot_ids.append(int(slot))

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.width), dtype=np.int64)
        return np.vstack(self.rows)

    def own_columns(self) -> np.ndarray:
        if self.receiver_id == 1:
            return np.arange(self.m1)
        return np.arange(self.m1, self.width)

    def interferer_columns(self) -> np.ndarray:
        if self.receiver_id == 1:
            return np.arange(self.m1, self.width)
        return np.arange(self.m1)

    def to_json(self) -> dict:
        return {
            "receiver_id": self.receiver_id,
            "m1": self.m1,
            "m2": self.m2,
            "rows": [[int(v) for v in r] for r in self.rows],
            "slot_ids": list(self.slot_ids),
        }


def decodable(
    store: EquationStore, own_count: int, interferer_count: int, fld: FieldSpec = FieldSpec()
) -> bool:
    """True iff the receiver's own packets are uniquely determined.

    Equivalent to rank(all rows) - rank(interferer columns) == own_count.
    """
    if own_count + interferer_count != store.width:
        raise ValueError("column counts do not match the store width")
    if own_count == 0:
        return True
    A = store.matrix() % fld.modulus
    if A.shape[0] == 0:
        return False
    order = np.concatenate([store.interferer_columns(), store.own_columns()])
    first, total = _echelon_counts(A[:, order].copy(), fld.modulus, interferer_count)
    return total - first == own_count


def project_out_known(store: EquationStore, known: dict) -> EquationStore:
    """Substitute known packet values: their columns move to the right-hand side.

    Only coefficients are tracked, so substitution zeroes the known columns.
    """
    out = EquationStore(store.receiver_id, store.m1, store.m2)
    cols = np.array(sorted(known), dtype=np.int64)
    if cols.size and (cols.min() < 0 or cols.max() >= store.width):
        raise ValueError("known packet index outside the store")
    for row, slot in zip(store.rows, store.slot_ids):
        r = row.copy()
        r[cols] = 0
        out.add(r, slot)
    return out
