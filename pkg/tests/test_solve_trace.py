"""
Tests for solver traces and their CSV form.
"""

import csv
import io
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'tools'))

from lagrange_space import CoefficientField, lagrange_space
from simplicial_mesh import build_uniform_mesh
from solve_trace import TRACE_HEADER, IterationRecord, SolveTrace, TraceWriter


@pytest.fixture
def trace():
    space = lagrange_space(build_uniform_mesh(2, 1), 1)
    final = CoefficientField(space, np.tile([0.0, 0.0, 1.0], (space.num_nodes, 1)))
    records = [
        IterationRecord(1, 4.0, 0.5, 0.0, 0.0, rho=0.95, radius=1.0, accepted=True),
        IterationRecord(2, 4.0, 0.4, 0.0, 0.0, rho=-0.2, radius=0.5, accepted=False),
        IterationRecord(3, 3.5, 0.1, 0.0, 0.0, rho=0.5, radius=0.5, accepted=True),
    ]
    return SolveTrace(solver='tr', initial_energy=5.0, final=final, records=records,
                      converged=True)


class TestSolveTrace:

    def test_summary(self, trace):
        assert trace.iterations == 3
        assert trace.final_energy == 3.5
        assert trace.success
        assert trace.accepted_energies() == [5.0, 4.0, 3.5]

    def test_empty_trace(self, trace):
        empty = SolveTrace(solver='gf', initial_energy=2.0, final=trace.final)
        assert empty.final_energy == 2.0
        assert empty.max_squared_violation == 0.0
        assert not empty.success

    def test_to_dict(self, trace):
        data = trace.to_dict()
        assert data['iterations'] == 3
        assert data['records'][1]['accepted'] is False

    def test_csv(self, trace, tmp_path):
        path = tmp_path / 'trace.csv'
        trace.write_csv(path)
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        assert rows[0] == TRACE_HEADER
        assert rows[2] == ['2', '4.0', '0.4', '0.0', '0.0', '-0.2', '0.5', '0']
        assert len(rows) == 4


class TestTraceWriter:

    def test_gradient_flow_rows_leave_tr_columns_empty(self):
        handle = io.StringIO()
        writer = TraceWriter(handle)
        writer(IterationRecord(1, 1.25, 0.125, 0.5, 0.75))
        lines = handle.getvalue().splitlines()
        assert lines[0] == ','.join(TRACE_HEADER)
        assert lines[1] == '1,1.25,0.125,0.5,0.75,,,1'
