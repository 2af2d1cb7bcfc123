"""MIP data model, MPS reading/writing, permutations and magnitude sets."""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import EmptyProblem, MalformedFile

INF = math.inf
SENSES = ("L", "G", "E")


class VarType(IntEnum):
    CONTINUOUS = 0
    BINARY = 1
    INTEGER = 2


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MipInstance:
    """``min c.x + obj_offset  s.t.  A x (sense) b,  lb <= x <= ub``.

    ``sense`` holds one of ``'L'``, ``'G'``, ``'E'`` per row and ``vartype``
    the :class:`VarType` code per column.  Integer columns whose bounds lie
    inside [0, 1] are stored as BINARY.  Instances are immutable.
    """

    name: str
    c: np.ndarray
    A: sp.csr_array
    b: np.ndarray
    sense: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    vartype: np.ndarray
    row_names: tuple = field(default=())
    col_names: tuple = field(default=())
    obj_offset: float = 0.0

    def __post_init__(self):
        A = sp.csr_array(self.A, dtype=np.float64)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        m, n = A.shape
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        sense = np.asarray(self.sense, dtype="<U1").reshape(-1)
        lb = np.asarray(self.lb, dtype=np.float64).reshape(-1)
        ub = np.asarray(self.ub, dtype=np.float64).reshape(-1)
        vt = np.asarray(self.vartype, dtype=np.int8).reshape(-1)
        if c.shape != (n,) or lb.shape != (n,) or ub.shape != (n,) or vt.shape != (n,):
            raise ValueError("column vectors do not match the matrix width")
        if b.shape != (m,) or sense.shape != (m,):
            raise ValueError("row vectors do not match the matrix height")
        if not np.isin(sense, SENSES).all():
            raise ValueError("row sense must be one of L, G, E")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        integer = vt != VarType.CONTINUOUS
        vt = np.where(integer & (lb >= 0) & (ub <= 1), VarType.BINARY, vt).astype(np.int8)
        vt = np.where((vt == VarType.BINARY) & ~((lb >= 0) & (ub <= 1)), VarType.INTEGER, vt).astype(np.int8)
        rn = tuple(self.row_names) or tuple(f"R{i}" for i in range(m))
        cn = tuple(self.col_names) or tuple(f"C{j}" for j in range(n))
        if len(rn) != m or len(cn) != n:
            raise ValueError("name lists do not match the dimensions")
        for arr in (A.data, A.indices, A.indptr):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", _readonly(c))
        object.__setattr__(self, "b", _readonly(b))
        object.__setattr__(self, "sense", _readonly(sense))
        object.__setattr__(self, "lb", _readonly(lb))
        object.__setattr__(self, "ub", _readonly(ub))
        object.__setattr__(self, "vartype", _readonly(vt))
        object.__setattr__(self, "row_names", rn)
        object.__setattr__(self, "col_names", cn)
        object.__setattr__(self, "obj_offset", float(self.obj_offset))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.A.nnz)

    @property
    def is_integer(self) -> np.ndarray:
        return self.vartype != VarType.CONTINUOUS

    def dense(self) -> np.ndarray:
        return self.A.toarray()

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float)) + self.obj_offset

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        if np.any(np.abs(x[self.is_integer] - np.round(x[self.is_integer])) > tol):
            return False
        act = self.A @ x
        scale = tol * np.maximum(1.0, np.abs(self.b))
        ok = np.where(
            self.sense == "L",
            act <= self.b + scale,
            np.where(self.sense == "G", act >= self.b - scale, np.abs(act - self.b) <= scale),
        )
        return bool(ok.all())

    def equals(self, other: "MipInstance") -> bool:
        """Field-by-field equality (exact floating point comparison)."""
        if not isinstance(other, MipInstance):
            return False
        if self.A.shape != other.A.shape:
            return False
        return (
            self.name == other.name
            and self.row_names == other.row_names
            and self.col_names == other.col_names
            and self.obj_offset == other.obj_offset
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.sense, other.sense)
            and np.array_equal(self.lb, other.lb)
            and np.array_equal(self.ub, other.ub)
            and np.array_equal(self.vartype, other.vartype)
            and np.array_equal(self.A.indptr, other.A.indptr)
            and np.array_equal(self.A.indices, other.A.indices)
            and np.array_equal(self.A.data, other.A.data)
        )

    def replace(self, **changes) -> "MipInstance":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return MipInstance(**kw)


# --------------------------------------------------------------------------
# magnitude sets
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MagnitudeSets:
    """Absolute values of the nonzero entries of A, b and c (sorted multisets)."""

    a_prime: np.ndarray
    b_prime: np.ndarray
    c_prime: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, MagnitudeSets):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("a_prime", "b_prime", "c_prime")
        )


def _nonzero_abs(v) -> np.ndarray:
    v = np.abs(np.asarray(v, dtype=float))
    return np.sort(v[v != 0])


def magnitude_sets(inst: MipInstance) -> MagnitudeSets:
    return MagnitudeSets(
        a_prime=_nonzero_abs(inst.A.data),
        b_prime=_nonzero_abs(inst.b),
        c_prime=_nonzero_abs(inst.c),
    )


# --------------------------------------------------------------------------
# permutations
# --------------------------------------------------------------------------


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")


def permutation_arrays(name: str, m: int, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column orders used by :func:`permute_instance`."""
    rng = np.random.default_rng(np.random.SeedSequence([_name_key(name), int(seed)]))
    return rng.permutation(m), rng.permutation(n)


def permute_instance(inst: MipInstance, seed: int) -> MipInstance:
    """Reorder rows and columns by a permutation derived from (name, seed).

    Seed 0 is the identity and returns ``inst`` itself.
    """
    if seed == 0:
        return inst
    if seed < 0:
        raise ValueError("permutation seed must be >= 0")
    rows, cols = permutation_arrays(inst.name, inst.m, inst.n, seed)
    A = inst.A[rows][:, cols]
    return MipInstance(
        name=inst.name,
        c=inst.c[cols],
        A=A,
        b=inst.b[rows],
        sense=inst.sense[rows],
        lb=inst.lb[cols],
        ub=inst.ub[cols],
        vartype=inst.vartype[cols],
        row_names=tuple(inst.row_names[i] for i in rows),
        col_names=tuple(inst.col_names[j] for j in cols),
        obj_offset=inst.obj_offset,
    )


# --------------------------------------------------------------------------
# MPS
# --------------------------------------------------------------------------

_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE", "OBJSENCE"}


def _num(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MalformedFile(f"line {lineno}: expected a number, got {tok!r}") from None


def parse_mps(source: str | TextIO) -> MipInstance:
    """Parse fixed- or free-format MPS text into a MIN-sense instance.

    ``source`` is the file content or an open text stream.  A missing ENDATA
    is tolerated; ranged rows are split into a G row and an extra L row.
    """
    lines: Iterable[str] = io.StringIO(source) if isinstance(source, str) else source

    name = ""
    section = None
    maximize = False
    obj_row = None
    ignored_rows: set[str] = set()
    row_index: dict[str, int] = {}
    row_names: list[str] = []
    row_sense: list[str] = []
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    col_int: list[bool] = []
    obj: dict[int, float] = {}
    entries: dict[tuple[int, int], float] = {}
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    offset = 0.0
    bounds: list[tuple[str, int, float, int]] = []
    in_int = False

    def row_of(rname: str, lineno: int):
        if rname == obj_row:
            return -1
        if rname in ignored_rows:
            return None
        try:
            return row_index[rname]
        except KeyError:
            raise MalformedFile(f"line {lineno}: unknown row {rname!r}") from None

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n\r")
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = line.split()
        if line[0] not in " \t":
            head = tokens[0].upper()
            if head not in _SECTIONS:
                raise MalformedFile(f"line {lineno}: unknown section {tokens[0]!r}")
            if head == "ENDATA":
                break
            section = head
            if head == "NAME":
                name = tokens[1] if len(tokens) > 1 else ""
            elif head in ("OBJSENSE", "OBJSENCE") and len(tokens) > 1:
                maximize = tokens[1].upper().startswith("MAX")
            continue

        if section in ("OBJSENSE", "OBJSENCE"):
            maximize = tokens[0].upper().startswith("MAX")
        elif section == "ROWS":
            if len(tokens) != 2:
                raise MalformedFile(f"line {lineno}: bad ROWS entry")
            kind, rname = tokens[0].upper(), tokens[1]
            if rname in row_index or rname == obj_row or rname in ignored_rows:
                raise MalformedFile(f"line {lineno}: duplicate row {rname!r}")
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                else:
                    ignored_rows.add(rname)
            elif kind in SENSES:
                row_index[rname] = len(row_names)
                row_names.append(rname)
                row_sense.append(kind)
            else:
                raise MalformedFile(f"line {lineno}: unknown row type {tokens[0]!r}")
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == "MARKER":
                marker = tokens[2].strip("'\"").upper()
                if marker == "INTORG":
                    in_int = True
                elif marker == "INTEND":
                    in_int = False
                else:
                    raise MalformedFile(f"line {lineno}: unknown marker {tokens[2]!r}")
                continue
            if len(tokens) not in (3, 5):
                raise MalformedFile(f"line {lineno}: bad COLUMNS entry")
            cname = tokens[0]
            j = col_index.get(cname)
            if j is None:
                j = col_index[cname] = len(col_names)
                col_names.append(cname)
                col_int.append(in_int)
            for k in range(1, len(tokens), 2):
                i = row_of(tokens[k], lineno)
                v = _num(tokens[k + 1], lineno)
                if i is None:
                    continue
                if i == -1:
                    if j in obj:
                        raise MalformedFile(f"line {lineno}: duplicate objective entry for {cname!r}")
                    obj[j] = v
                else:
                    if (i, j) in entries:
                        raise MalformedFile(f"line {lineno}: duplicate entry ({tokens[k]}, {cname})")
                    entries[(i, j)] = v
        elif section in ("RHS", "RANGES"):
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            if len(pairs) not in (2, 4):
                raise MalformedFile(f"line {lineno}: bad {section} entry")
            for k in range(0, len(pairs), 2):
                i = row_of(pairs[k], lineno)
                v = _num(pairs[k + 1], lineno)
                if i is None:
                    continue
                if section == "RHS":
                    if i == -1:
                        offset = -v
                    else:
                        rhs[i] = v
                elif i >= 0:
                    ranges[i] = v
        elif section == "BOUNDS":
            kind = tokens[0].upper()
            needs_value = kind in ("UP", "LO", "FX", "LI", "UI")
            if kind not in ("UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"):
                raise MalformedFile(f"line {lineno}: unsupported bound type {tokens[0]!r}")
            if needs_value:
                if len(tokens) == 4:
                    cname, v = tokens[2], _num(tokens[3], lineno)
                elif len(tokens) == 3:
                    cname, v = tokens[1], _num(tokens[2], lineno)
                else:
                    raise MalformedFile(f"line {lineno}: bad BOUNDS entry")
            else:
                if len(tokens) in (3, 4):
                    cname = tokens[2]
                elif len(tokens) == 2:
                    cname = tokens[1]
                else:
                    raise MalformedFile(f"line {lineno}: bad BOUNDS entry")
                v = 0.0
            if cname not in col_index:
                raise MalformedFile(f"line {lineno}: bound for unknown column {cname!r}")
            bounds.append((kind, col_index[cname], v, lineno))
        else:
            raise MalformedFile(f"line {lineno}: data outside of a section")

    m, n = len(row_names), len(col_names)
    if m == 0 or n == 0:
        raise EmptyProblem("problem has no constraints" if m == 0 else "problem has no columns")

    lb = np.zeros(n)
    ub = np.full(n, INF)
    vartype = np.array(
        [VarType.INTEGER if f else VarType.CONTINUOUS for f in col_int], dtype=np.int8
    )
    for kind, j, v, lineno in bounds:
        if kind == "UP":
            ub[j] = v
            if v < 0 and lb[j] == 0:
                lb[j] = -INF
        elif kind == "LO":
            lb[j] = v
        elif kind == "FX":
            lb[j] = ub[j] = v
        elif kind == "FR":
            lb[j], ub[j] = -INF, INF
        elif kind == "MI":
            lb[j] = -INF
        elif kind == "PL":
            ub[j] = INF
        elif kind == "BV":
            lb[j], ub[j] = 0.0, 1.0
            vartype[j] = VarType.BINARY
        elif kind == "LI":
            lb[j] = v
            vartype[j] = VarType.INTEGER
        elif kind == "UI":
            ub[j] = v
            vartype[j] = VarType.INTEGER
        if lb[j] > ub[j]:
            raise MalformedFile(f"line {lineno}: bounds of {col_names[j]!r} cross")

    b = np.array([rhs.get(i, 0.0) for i in range(m)])
    sense = list(row_sense)
    rows = [i for (i, _) in entries]
    cols = [j for (_, j) in entries]
    vals = list(entries.values())

    # ranged rows: row i becomes the lower side, a new L row the upper side
    used = set(row_names)
    for i in sorted(ranges):
        r = ranges[i]
        if r == 0 and sense[i] == "E":
            continue
        if sense[i] == "E":
            lo, hi = (b[i], b[i] + r) if r > 0 else (b[i] + r, b[i])
        elif sense[i] == "L":
            lo, hi = b[i] - abs(r), b[i]
        else:
            lo, hi = b[i], b[i] + abs(r)
        new = len(sense)
        rname = row_names[i] + "_rng"
        while rname in used:
            rname += "_"
        used.add(rname)
        row_names.append(rname)
        sense[i] = "G"
        sense.append("L")
        b[i] = lo
        b = np.append(b, hi)
        for (ii, jj), v in list(entries.items()):
            if ii == i:
                rows.append(new)
                cols.append(jj)
                vals.append(v)

    c = np.zeros(n)
    for j, v in obj.items():
        c[j] = v
    if maximize:
        c = -c
        offset = -offset
    A = sp.csr_array((vals, (rows, cols)), shape=(len(sense), n))
    return MipInstance(
        name=name,
        c=c,
        A=A,
        b=b,
        sense=np.array(sense),
        lb=lb,
        ub=ub,
        vartype=vartype,
        row_names=tuple(row_names),
        col_names=tuple(col_names),
        obj_offset=offset + 0.0,
    )


def read_mps(path: str | Path) -> MipInstance:
    with open(path) as fh:
        return parse_mps(fh)


def _g(v: float) -> str:
    return f"{v:.12g}"


def write_mps(inst: MipInstance) -> str:
    """Free-format MPS text (12 significant digits, MIN sense)."""
    out = [f"NAME {inst.name}" if inst.name else "NAME", "ROWS", " N OBJ"]
    for s, rn in zip(inst.sense, inst.row_names):
        out.append(f" {s} {rn}")
    out.append("COLUMNS")
    At = inst.A.tocsc()
    At.sort_indices()
    in_int = False
    n_marker = 0
    for j, cn in enumerate(inst.col_names):
        is_int = bool(inst.vartype[j] != VarType.CONTINUOUS)
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.append(f"    MARKER{n_marker} 'MARKER' {tag}")
            n_marker += 1
            in_int = is_int
        wrote = False
        if inst.c[j] != 0:
            out.append(f"    {cn} OBJ {_g(inst.c[j])}")
            wrote = True
        lo, hi = At.indptr[j], At.indptr[j + 1]
        for i, v in zip(At.indices[lo:hi], At.data[lo:hi]):
            out.append(f"    {cn} {inst.row_names[i]} {_g(v)}")
            wrote = True
        if not wrote:
            out.append(f"    {cn} OBJ 0")
    if in_int:
        out.append(f"    MARKER{n_marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    for i, rn in enumerate(inst.row_names):
        if inst.b[i] != 0:
            out.append(f"    RHS {rn} {_g(inst.b[i])}")
    if inst.obj_offset != 0:
        out.append(f"    RHS OBJ {_g(-inst.obj_offset)}")
    out.append("BOUNDS")
    for j, cn in enumerate(inst.col_names):
        lo, hi = inst.lb[j], inst.ub[j]
        if lo == hi:
            out.append(f" FX BND {cn} {_g(lo)}")
            continue
        if lo == -INF and hi == INF:
            out.append(f" FR BND {cn}")
            continue
        if lo == -INF:
            out.append(f" MI BND {cn}")
        elif lo != 0:
            out.append(f" LO BND {cn} {_g(lo)}")
        if hi != INF:
            out.append(f" UP BND {cn} {_g(hi)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def save_mps(inst: MipInstance, path: str | Path) -> None:
    Path(path).write_text(write_mps(inst))
