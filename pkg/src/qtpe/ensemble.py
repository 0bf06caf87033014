"""Unitary ensembles: the central data type, its algebra, and file I/O.

An ensemble is a degree-s set of n x n unitaries with uniform weights 1/s and
an optional index involution `-` satisfying U_{-i} = U_i†. Constructors cover
Haar-random sampling plus the doubling / squaring / tensoring operations.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EnsembleFormatError, PreconditionError, SizeLimitError
from .linalg import SeededRng, haar_unitary, kron

MAGIC = b"QTPE"
FORMAT_VERSION = 1
SQUARE_DEGREE_LIMIT = 4096
TENSOR_LIMIT = 4096


@dataclass
class UnitaryEnsemble:
    """Degree-s set of dim x dim unitaries with optional Hermitian involution.

    `unitaries` is stored as an (s, dim, dim) complex array; `involution`
    maps index i to -i (0-based) when present. Treated as immutable after
    construction.
    """

    dim: int
    unitaries: np.ndarray
    involution: tuple[int, ...] | None = None
    label: str = ""

    def __post_init__(self):
        self.unitaries = np.ascontiguousarray(self.unitaries, dtype=complex)
        if self.unitaries.ndim != 3 or self.unitaries.shape[1:] != (self.dim, self.dim):
            raise PreconditionError(
                f"unitaries must have shape (s, {self.dim}, {self.dim}), got {self.unitaries.shape}"
            )
        if self.unitaries.shape[0] < 1:
            raise PreconditionError("an ensemble needs at least one member")
        if self.involution is not None:
            self.involution = tuple(int(i) for i in self.involution)
            if len(self.involution) != self.size:
                raise PreconditionError("involution length must equal the degree")
        self.unitaries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.unitaries.shape[0]

    def member(self, i: int) -> np.ndarray:
        return self.unitaries[i]

    def adjoints(self) -> np.ndarray:
        return self.unitaries.conj().transpose(0, 2, 1)


@dataclass
class ValidationReport:
    """Defect summary for an ensemble; passes iff every defect is <= tol."""

    unitarity_defect: float
    involution_defect: float
    dimension_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.dimension_ok and self.unitarity_defect <= self.tol and self.involution_defect <= self.tol


def validate(e: UnitaryEnsemble, tol: float = 1e-10) -> ValidationReport:
    """Report unitarity, involution consistency, and dimension consistency."""
    eye = np.eye(e.dim)
    gram = np.matmul(e.adjoints(), e.unitaries)
    unitarity = float(np.sqrt(np.sum(np.abs(gram - eye) ** 2, axis=(1, 2))).max())
    involution = 0.0
    if e.involution is not None:
        inv = e.involution
        structural = sorted(inv) == list(range(e.size)) and all(inv[inv[i]] == i for i in range(e.size))
        if not structural:
            involution = np.inf
        else:
            diffs = e.unitaries[list(inv)] - e.adjoints()
            involution = float(np.sqrt(np.sum(np.abs(diffs) ** 2, axis=(1, 2))).max())
    return ValidationReport(unitarity, involution, dimension_ok=True, tol=tol)


def sample_random_qtpe(d: int, s: int, rng: SeededRng, label: str = "") -> UnitaryEnsemble:
    """Haar-random ensemble: s/2 independent Haar unitaries plus their adjoints.

    Requires even s >= 4. Involution is -i = (i + s/2) mod s, making the
    result explicitly Hermitian.
    """
    if s < 4 or s % 2 != 0:
        raise PreconditionError(f"degree must be an even integer >= 4, got {s}")
    if d < 1:
        raise PreconditionError(f"dimension must be >= 1, got {d}")
    half = np.stack([haar_unitary(d, rng.child(i)) for i in range(s // 2)])
    members = np.concatenate([half, half.conj().transpose(0, 2, 1)])
    involution = tuple((i + s // 2) % s for i in range(s))
    return UnitaryEnsemble(d, members, involution, label or f"haar-d{d}-s{s}")


def hermitian_double(e: UnitaryEnsemble) -> UnitaryEnsemble:
    """Union with the adjoint family (kept with multiplicity): degree exactly 2s."""
    members = np.concatenate([e.unitaries, e.adjoints()])
    s = e.size
    involution = tuple(list(range(s, 2 * s)) + list(range(s)))
    return UnitaryEnsemble(e.dim, members, involution, f"double({e.label})" if e.label else "double")


def square_compose(e: UnitaryEnsemble) -> UnitaryEnsemble:
    """All s^2 products U_i U_j in row-major (i, j) order; no involution attached."""
    s = e.size
    if s * s > SQUARE_DEGREE_LIMIT:
        raise SizeLimitError(f"squared degree {s*s} exceeds guard {SQUARE_DEGREE_LIMIT}")
    prods = np.matmul(e.unitaries[:, None], e.unitaries[None, :]).reshape(s * s, e.dim, e.dim)
    return UnitaryEnsemble(e.dim, prods, None, f"square({e.label})" if e.label else "square")


def tensor_ensemble(e: UnitaryEnsemble) -> UnitaryEnsemble:
    """All s^2 tensor products U_i (x) U_j on dimension dim^2."""
    s = e.size
    if s * s > SQUARE_DEGREE_LIMIT or e.dim * e.dim > TENSOR_LIMIT:
        raise SizeLimitError(f"tensor ensemble size (s^2={s*s}, dim^2={e.dim**2}) exceeds guards")
    members = np.stack([kron(a, b) for a in e.unitaries for b in e.unitaries])
    return UnitaryEnsemble(e.dim * e.dim, members, None, f"tensor({e.label})" if e.label else "tensor")


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save(e: UnitaryEnsemble, path: str | Path, sidecar: dict | None = None) -> Path:
    """Write the bit-exact binary format plus a JSON sidecar with provenance.

    Layout: magic "QTPE", version byte 0x01, little-endian u32 dim, u32 count,
    u8 involution flag, optional count u32 involution targets, then
    count*dim^2 complex entries as little-endian f64 pairs (real, imag),
    row-major per unitary. The binary file alone is authoritative for
    numerics.
    """
    path = Path(path)
    blob = bytearray()
    blob += MAGIC
    blob += bytes([FORMAT_VERSION])
    blob += struct.pack("<II", e.dim, e.size)
    if e.involution is not None:
        blob += bytes([1])
        blob += struct.pack(f"<{e.size}I", *e.involution)
    else:
        blob += bytes([0])
    blob += np.ascontiguousarray(e.unitaries).astype("<c16").tobytes()
    path.write_bytes(bytes(blob))
    meta = {"label": e.label}
    if sidecar:
        meta.update(sidecar)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load(path: str | Path) -> UnitaryEnsemble:
    """Read the binary format back; round-trips save() bit-exactly."""
    path = Path(path)
    raw = path.read_bytes()
    off = 0

    def take(nbytes: int, fieldname: str) -> bytes:
        nonlocal off
        if off + nbytes > len(raw):
            raise EnsembleFormatError(fieldname, f"file truncated at byte {off} (need {nbytes} more)")
        out = raw[off : off + nbytes]
        off += nbytes
        return out

    if take(4, "magic") != MAGIC:
        raise EnsembleFormatError("magic", "not a QTPE ensemble file")
    version = take(1, "version")[0]
    if version != FORMAT_VERSION:
        raise EnsembleFormatError("version", f"unsupported version {version}")
    dim, count = struct.unpack("<II", take(8, "dim/count"))
    if dim < 1:
        raise EnsembleFormatError("dim", f"dimension must be positive, got {dim}")
    if count < 1:
        raise EnsembleFormatError("count", f"count must be positive, got {count}")
    flag = take(1, "involution-flag")[0]
    if flag not in (0, 1):
        raise EnsembleFormatError("involution-flag", f"must be 0 or 1, got {flag}")
    involution = None
    if flag:
        vals = struct.unpack(f"<{count}I", take(4 * count, "involution"))
        if sorted(vals) != list(range(count)) or any(vals[vals[i]] != i for i in range(count)):
            raise EnsembleFormatError("involution", "not a bijective involution on the index set")
        involution = tuple(vals)
    payload = take(count * dim * dim * 16, "payload")
    if off != len(raw):
        raise EnsembleFormatError("payload", f"{len(raw) - off} trailing bytes after payload")
    members = np.frombuffer(payload, dtype="<c16").astype(complex).reshape(count, dim, dim)
    label = ""
    side = sidecar_path(path)
    if side.exists():
        try:
            label = str(json.loads(side.read_text()).get("label", ""))
        except (json.JSONDecodeError, OSError):
            label = ""
    return UnitaryEnsemble(dim, members, involution, label)
