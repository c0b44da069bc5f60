#!/usr/bin/env python3
"""
solve_trace.py - Iteration records shared by the harmonic map solvers

Usage:
    from solve_trace import TraceWriter

    with open('trace.csv', 'w', newline='') as handle:
        trace = trust_region_solve(coeffs, kind, cfg, on_iteration=TraceWriter(handle))
"""

import csv
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

sys.path.insert(0, str(Path(__file__).parent))
from lagrange_space import CoefficientField


TRACE_HEADER = ['iteration', 'energy', 'correction_norm', 'delta1',
                'squared_violation', 'rho', 'radius', 'accepted']


@dataclass
class IterationRecord:
    """One solver iteration. rho/radius stay None for the gradient flow."""
    iteration: int
    energy: float
    correction_norm: float
    delta1: float
    squared_violation: float
    rho: Optional[float] = None
    radius: Optional[float] = None
    accepted: bool = True

    def csv_row(self) -> List[str]:
        return [str(self.iteration), repr(self.energy), repr(self.correction_norm),
                repr(self.delta1), repr(self.squared_violation),
                '' if self.rho is None else repr(self.rho),
                '' if self.radius is None else repr(self.radius),
                str(int(self.accepted))]


@dataclass
class SolveTrace:
    """Result of a solve: per-iteration records and the final field."""
    solver: str
    initial_energy: float
    final: CoefficientField
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def success(self) -> bool:
        return self.converged and len(self.errors) == 0

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy if self.records else self.initial_energy

    @property
    def max_squared_violation(self) -> float:
        return max((r.squared_violation for r in self.records), default=0.0)

    def accepted_energies(self) -> List[float]:
        return [self.initial_energy] + [r.energy for r in self.records if r.accepted]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'solver': self.solver,
            'initial_energy': self.initial_energy,
            'final_energy': self.final_energy,
            'iterations': self.iterations,
            'converged': self.converged,
            'wall_time': self.wall_time,
            'records': [asdict(r) for r in self.records],
            'errors': self.errors,
            'warnings': self.warnings,
        }

    def write_csv(self, path: Path) -> None:
        with open(path, 'w', newline='') as handle:
            writer = TraceWriter(handle)
            for record in self.records:
                writer(record)


class TraceWriter:
    """Streams one CSV line per iteration; usable as an on_iteration callback."""

    def __init__(self, handle: TextIO):
        self.handle = handle
        self.writer = csv.writer(handle, lineterminator='\n')
        self.writer.writerow(TRACE_HEADER)

    def __call__(self, record: IterationRecord) -> None:
        self.writer.writerow(record.csv_row())
        self.handle.flush()
