"""Solver configuration and the per-run record written to ``runs.jsonl``."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from ..errors import SchemaMismatch

SCHEMA_VERSION = 1

LC, NLC = "LC", "NLC"
OPTIMAL, LIMIT, INFEASIBLE, ERROR = "OPTIMAL", "LIMIT", "INFEASIBLE", "ERROR"


@dataclass(frozen=True)
class SolverConfig:
    local_cuts: bool = True
    work_limit: int = 200_000
    wall_limit_s: float = 120.0
    max_root_rounds: int = 10
    max_cuts_per_round: int = 20
    node_cut_rounds: int = 1

    def __post_init__(self):
        if self.work_limit <= 0 or self.wall_limit_s <= 0:
            raise ValueError("limits must be positive")
        if self.max_root_rounds < 0 or self.max_cuts_per_round < 0 or self.node_cut_rounds < 0:
            raise ValueError("round and cut counts must be non-negative")

    @property
    def strategy(self) -> str:
        return LC if self.local_cuts else NLC

    def with_strategy(self, strategy: str) -> "SolverConfig":
        kw = asdict(self)
        kw["local_cuts"] = strategy == LC
        return SolverConfig(**kw)


@dataclass
class RootStats:
    c_i: Optional[float] = None
    c_d: Optional[float] = None
    c_p: Optional[float] = None
    cuts_added: int = 0
    rounds: int = 0
    nnz_before: int = 0
    nnz_after: int = 0
    m_presolved: int = 0
    n_presolved: int = 0
    scaled_a_max: Optional[float] = None
    scaled_a_min: Optional[float] = None
    scaled_b_max: Optional[float] = None
    scaled_b_min: Optional[float] = None
    scaled_c_max: Optional[float] = None
    scaled_c_min: Optional[float] = None


@dataclass
class RunRecord:
    problem_id: str
    seed: int
    strategy: str
    status: str
    work: int
    wall_s: float
    nodes: int
    pdi: float
    obj_primal: Optional[float]
    obj_dual: Optional[float]
    root: RootStats = field(default_factory=RootStats)
    message: str = ""

    @property
    def key(self):
        return (self.problem_id, self.seed)

    @property
    def solved(self) -> bool:
        return self.status in (OPTIMAL, INFEASIBLE)

    def to_json(self) -> dict:
        d = {"v": SCHEMA_VERSION}
        d.update(asdict(self))
        return d

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        if d.get("v") != SCHEMA_VERSION:
            raise SchemaMismatch(f"run record version {d.get('v')!r}, expected {SCHEMA_VERSION}")
        kw = {f.name: d[f.name] for f in fields(cls) if f.name in d}
        kw["root"] = RootStats(**d.get("root", {}))
        return cls(**kw)

    def same_as(self, other: "RunRecord") -> bool:
        """Equality ignoring wall-clock time."""
        a, b = self.to_json(), other.to_json()
        a.pop("wall_s")
        b.pop("wall_s")
        return a == b


def write_runs(records: Iterable[RunRecord], path, append: bool = False) -> None:
    with open(path, "a" if append else "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_runs(path) -> list[RunRecord]:
    """Load records; a truncated final line (interrupted writer) is ignored."""
    out = []
    p = Path(path)
    if not p.exists():
        return out
    text = p.read_text()
    lines = text.split("\n")
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(RunRecord.from_json(json.loads(line)))
        except json.JSONDecodeError as exc:
            if lineno == len(lines) and not text.endswith("\n"):
                break
            raise SchemaMismatch(f"{path}:{lineno}: {exc}") from None
    return out
