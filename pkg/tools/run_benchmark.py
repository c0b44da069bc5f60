#!/usr/bin/env python3
"""
run_benchmark.py - Harmonic map benchmark harness

Runs (problem x discretization x solver x order) over a range of refinement
levels, computes errors and experimental orders of convergence and writes
table.csv, report.json, per-level solver traces and optional VTK fields.

Usage:
    python tools/run_benchmark.py run --problem p1 --solver tr --level-max 4
    python tools/run_benchmark.py run --config run.yaml --output-dir out/p1
    python tools/run_benchmark.py run --config run.toml
    python tools/run_benchmark.py sweep sweep.yaml --output-dir out
    python tools/run_benchmark.py table out/p1/report.json

Exit codes:
    0  every level solved
    2  some level aborted (singular projection, linear solver breakdown)
    1  invalid configuration
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

sys.path.insert(0, str(Path(__file__).parent))
from benchmark_problems import get_problem, initial_coefficients, problem_ids
from dirichlet_energy import (ENERGY_EXACTNESS, ERROR_EXACTNESS, DiscretizationKind,
                              constraint_violation, dirichlet_energy, eoc, error_norms,
                              stationarity_residual)
from gradient_flow import GradientFlowConfig, LinearSolverError, gradient_flow_solve
from lagrange_space import lagrange_space
from simplicial_mesh import MAX_LEVEL, build_uniform_mesh
from singularity_census import singularity_census
from solve_trace import TraceWriter
from sphere_geometry import SingularProjectionError, TangencyError
from trust_region import TR_NORMS, TrustRegionConfig, trust_region_solve
from vtk_export import write_field


__version__ = '0.1.0'

logger = logging.getLogger(__name__)

CSV_HEADER = ['r', 'elements', 'E0', 'E', 'errL2', 'errH1', 'eocL2', 'eocH1',
              'iters', 'delta1', 'seconds']
SOLVER_FAILURES = (SingularProjectionError, LinearSolverError, TangencyError)


class ConfigError(ValueError):
    """Invalid run configuration."""
    pass


# =============================================================================
# Configuration
# =============================================================================

@dataclass
class RunConfig:
    """One benchmark run. None means 'use the problem default'."""
    problem: str = 'p1'
    discretization: str = 'nc'
    solver: str = 'tr'
    order: int = 1
    level_min: int = 1
    level_max: Optional[int] = None
    tau_factor: Optional[float] = None
    eps_stop: Optional[float] = None
    project_nodes: bool = False
    max_iters: Optional[int] = None
    tr_norm: str = 'euclidean'
    delta0: float = 0.5
    beta1: float = 0.9
    beta2: float = 1e-2
    census: Optional[bool] = None
    output_dir: Optional[str] = None
    emit_vtk: bool = False

    @property
    def levels(self) -> List[int]:
        return list(range(self.level_min, self.level_max + 1))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        known = {f.name for f in fields(cls)}
        normalized = {}
        for key, value in (data or {}).items():
            name = str(key).replace('-', '_')
            if name not in known:
                raise ConfigError(f"Unknown config key '{key}'")
            normalized[name] = value
        return cls(**normalized)

    def resolved(self) -> 'RunConfig':
        """Fill problem-dependent defaults and validate."""
        try:
            problem = get_problem(self.problem)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg = replace(
            self,
            level_max=problem.max_level if self.level_max is None else self.level_max,
            tau_factor=problem.tau_factor if self.tau_factor is None else self.tau_factor,
            eps_stop=problem.eps_stop if self.eps_stop is None else self.eps_stop,
            census=(problem.dim == 3 and problem.target_dim == 3 and self.order == 1)
            if self.census is None else self.census,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.discretization not in ('nc', 'proj'):
            raise ConfigError(f"discretization must be 'nc' or 'proj', got '{self.discretization}'")
        if self.solver not in ('gf', 'tr'):
            raise ConfigError(f"solver must be 'gf' or 'tr', got '{self.solver}'")
        if self.solver == 'gf' and self.discretization != 'nc':
            raise ConfigError("The gradient flow exists only for the nonconforming discretization")
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if not 1 <= self.level_min <= self.level_max <= MAX_LEVEL:
            raise ConfigError(
                f"Need 1 <= level_min <= level_max <= {MAX_LEVEL}, "
                f"got {self.level_min}..{self.level_max}")
        if self.tr_norm not in TR_NORMS:
            raise ConfigError(f"tr_norm must be one of {TR_NORMS}, got '{self.tr_norm}'")
        try:
            self.solver_config(1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.census and get_problem(self.problem).dim != 3:
            raise ConfigError("The singularity census needs a 3D problem")

    def solver_config(self, h: float):
        if self.solver == 'gf':
            cfg = GradientFlowConfig(tau=self.tau_factor * h, eps_stop=self.eps_stop,
                                     project_nodes=self.project_nodes)
        else:
            cfg = TrustRegionConfig(delta0=self.delta0, beta1=self.beta1, beta2=self.beta2,
                                    eps_stop=self.eps_stop, norm=self.tr_norm)
        if self.max_iters is not None:
            cfg.max_iters = self.max_iters
        return cfg


def load_config_file(path) -> Dict[str, Any]:
    """Mapping from a config file: TOML by suffix, otherwise YAML (or JSON)."""
    path = Path(path)
    try:
        if path.suffix == '.toml':
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        else:
            with open(path) as f:
                data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must contain a mapping")
    return data


# =============================================================================
# Report
# =============================================================================

@dataclass
class LevelRow:
    r: int
    elements: int
    E0: float = math.nan
    E: float = math.nan
    errL2: float = math.nan
    errH1: float = math.nan
    eocL2: float = math.nan
    eocH1: float = math.nan
    iters: int = 0
    delta1: float = math.nan
    squared_violation: float = math.nan
    seconds: float = 0.0
    tau: Optional[float] = None
    converged: bool = False
    residual: float = math.nan
    max_squared_violation: float = math.nan
    singularities: List[Dict[str, Any]] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.error is None


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _from_json(value):
    return math.nan if value is None else value


@dataclass
class RunReport:
    config: Dict[str, Any]
    rows: List[LevelRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return not self.errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config,
            'metadata': self.metadata,
            'rows': [{k: _json_value(v) for k, v in asdict(row).items()} for row in self.rows],
            'errors': self.errors,
            'warnings': self.warnings,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        float_fields = {f.name for f in fields(LevelRow) if f.type in (float, 'float')}
        rows = []
        for raw in data.get('rows', []):
            row = dict(raw)
            for name in float_fields:
                if name in row:
                    row[name] = _from_json(row[name])
            rows.append(LevelRow(**row))
        return cls(config=data.get('config', {}), rows=rows, metadata=data.get('metadata', {}),
                   errors=list(data.get('errors', [])), warnings=list(data.get('warnings', [])))

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_csv_cell(getattr(row, name)) for name in CSV_HEADER])
        return buffer.getvalue()


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return '' if math.isnan(value) else repr(value)
    return str(value)


def emit_report(report: RunReport, directory) -> List[Path]:
    """Write table.csv and report.json into directory."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        table = directory / 'table.csv'
        table.write_text(report.csv_text())
        data = directory / 'report.json'
        data.write_text(json.dumps(report.to_dict(), indent=2) + '\n')
    except OSError as exc:
        raise OSError(f"Cannot write report to {directory}: {exc}") from exc
    return [table, data]


def load_report(path) -> RunReport:
    with open(path) as f:
        return RunReport.from_dict(json.load(f))


def format_table(report: RunReport) -> str:
    """Aligned text table in the layout of the CSV."""
    widths = {'r': 3, 'elements': 9, 'iters': 6}
    header = '  '.join(f"{name:>{widths.get(name, 12)}}" for name in CSV_HEADER)
    lines = [header, '-' * len(header)]
    for row in report.rows:
        cells = []
        for name in CSV_HEADER:
            value = getattr(row, name)
            width = widths.get(name, 12)
            if isinstance(value, float):
                text = '' if math.isnan(value) else (
                    f"{value:.2f}" if name.startswith('eoc') else f"{value:.6g}")
            else:
                text = str(value)
            cells.append(f"{text:>{width}}")
        line = '  '.join(cells)
        if row.error:
            line += f"  aborted: {row.error}"
        lines.append(line)
    return '\n'.join(lines)


# =============================================================================
# Benchmark driver
# =============================================================================

def _fill_errors(rows: List[LevelRow], finals: Dict[int, Any], kind: DiscretizationKind,
                 exact, report: RunReport) -> None:
    """Errors against the exact solution, else differences of consecutive levels."""
    for row in rows:
        if row.r not in finals:
            continue
        try:
            if exact is not None:
                row.errL2, row.errH1 = error_norms((finals[row.r], kind), exact)
            elif row.r - 1 in finals:
                row.errL2, row.errH1 = error_norms((finals[row.r], kind),
                                                   (finals[row.r - 1], kind))
        except SingularProjectionError as exc:
            report.warnings.append(f"level {row.r}: error evaluation failed: {exc}")

    by_level = {row.r: row for row in rows}
    for row in rows:
        previous = by_level.get(row.r - 1)
        if previous is None:
            continue
        for err, rate in (('errL2', 'eocL2'), ('errH1', 'eocH1')):
            pair = [getattr(previous, err), getattr(row, err)]
            if all(v > 0 for v in pair):
                setattr(row, rate, eoc(pair)[0])


def _solver_metadata(cfg: RunConfig) -> Dict[str, Any]:
    """Effective solver parameters; the per-level tau lives in the rows."""
    data = asdict(cfg.solver_config(1.0))
    if data.pop('tau', None) is not None:
        data['tau_factor'] = cfg.tau_factor
    return data


def run_benchmark(cfg: RunConfig) -> RunReport:
    """
    Solve every level of cfg and collect the table.

    Per-level failures are recorded on the row and in report.errors; the
    sweep continues with the next level.
    """
    cfg = cfg.resolved()
    problem = get_problem(cfg.problem)
    kind = DiscretizationKind(cfg.discretization)
    output = Path(cfg.output_dir) if cfg.output_dir else None
    if output is not None:
        output.mkdir(parents=True, exist_ok=True)

    report = RunReport(config=cfg.to_dict(), metadata={
        'version': __version__,
        'problem': problem.description,
        'energy_quadrature_exactness': ENERGY_EXACTNESS,
        'error_quadrature_exactness': ERROR_EXACTNESS,
        'solver_config': _solver_metadata(cfg),
        'exact_energy': problem.exact_energy() if problem.exact_energy else None,
    })
    finals = {}

    for level in cfg.levels:
        start = time.perf_counter()
        mesh = build_uniform_mesh(problem.dim, level)
        space = lagrange_space(mesh, cfg.order)
        solver_cfg = cfg.solver_config(mesh.mesh_size)
        row = LevelRow(r=level, elements=mesh.num_elements,
                       tau=getattr(solver_cfg, 'tau', None))
        report.rows.append(row)
        logger.info("%s %s/%s p=%d level %d: %d elements, %d nodes", problem.id,
                    cfg.discretization, cfg.solver, cfg.order, level, mesh.num_elements,
                    space.num_nodes)
        trace_handle = open(output / f'trace_r{level}.csv', 'w', newline='') if output else None
        try:
            initial = initial_coefficients(problem, space)
            row.E0 = dirichlet_energy(initial, kind)
            on_iteration = TraceWriter(trace_handle) if trace_handle else None
            if cfg.solver == 'gf':
                trace = gradient_flow_solve(initial, solver_cfg, on_iteration=on_iteration)
            else:
                trace = trust_region_solve(initial, kind, solver_cfg, on_iteration=on_iteration)
            final = trace.final
            row.E = trace.final_energy
            row.iters = trace.iterations
            row.converged = trace.converged
            row.delta1, row.squared_violation = constraint_violation(final)
            row.max_squared_violation = trace.max_squared_violation
            row.residual = stationarity_residual(final, kind)
            report.warnings.extend(f"level {level}: {w}" for w in trace.warnings)
            if cfg.census:
                row.singularities = [s.to_dict() for s in singularity_census(final)]
            if output is not None and cfg.emit_vtk:
                write_field(output / f'field_r{level}.vtk', final)
            finals[level] = final
        except SOLVER_FAILURES as exc:
            row.error = str(exc)
            report.errors.append(f"level {level}: {exc}")
            logger.warning("Level %d aborted: %s", level, exc)
        finally:
            if trace_handle is not None:
                trace_handle.close()
        row.seconds = time.perf_counter() - start

    _fill_errors(report.rows, finals, kind, problem.exact_solution, report)
    if output is not None:
        emit_report(report, output)
    return report


def run_sweep(path, output_dir: Optional[str] = None) -> List[RunReport]:
    """Run every entry of a sweep file ('runs' list, optional 'defaults')."""
    data = load_config_file(path)
    runs = data.get('runs')
    if not isinstance(runs, list) or not runs:
        raise ConfigError(f"Sweep file {path} needs a non-empty 'runs' list")
    unknown = set(data) - {'runs', 'defaults'}
    if unknown:
        raise ConfigError(f"Unknown sweep keys: {', '.join(sorted(unknown))}")
    defaults = data.get('defaults') or {}

    configs = []
    for index, entry in enumerate(runs):
        merged = {**defaults, **(entry or {})}
        name = merged.pop('name', None) or f"{index:02d}"
        cfg = RunConfig.from_dict(merged)
        if output_dir is not None:
            label = f"{name}_{cfg.problem}_{cfg.discretization}_{cfg.solver}_p{cfg.order}"
            cfg = replace(cfg, output_dir=str(Path(output_dir) / label))
        configs.append(cfg.resolved())
    return [run_benchmark(cfg) for cfg in configs]


# =============================================================================
# Command line
# =============================================================================

def _exit_code(reports: List[RunReport]) -> int:
    return 0 if all(r.success for r in reports) else 2


def _config_from_args(args) -> RunConfig:
    data = load_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    return RunConfig.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Harmonic map benchmark harness')
    parser.add_argument('-v', '--verbose', action='store_true', help='Log solver iterations')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run a single configuration')
    run.add_argument('--config', help='YAML, JSON or TOML file with RunConfig keys')
    run.add_argument('--problem', choices=problem_ids())
    run.add_argument('--discretization', choices=['nc', 'proj'])
    run.add_argument('--solver', choices=['gf', 'tr'])
    run.add_argument('--order', type=int, choices=[1, 2])
    run.add_argument('--level-min', dest='level_min', type=int)
    run.add_argument('--level-max', dest='level_max', type=int)
    run.add_argument('--tau-factor', dest='tau_factor', type=float, help='tau = factor * h')
    run.add_argument('--eps-stop', dest='eps_stop', type=float)
    run.add_argument('--project-nodes', dest='project_nodes', action='store_true', default=None)
    run.add_argument('--max-iters', dest='max_iters', type=int)
    run.add_argument('--tr-norm', dest='tr_norm', choices=list(TR_NORMS))
    run.add_argument('--census', dest='census', action='store_true', default=None,
                     help='Count point singularities of the final fields (3D)')
    run.add_argument('--output-dir', dest='output_dir')
    run.add_argument('--emit-vtk', dest='emit_vtk', action='store_true', default=None)
    run.add_argument('--json', action='store_true', help='Print report.json instead of a table')

    sweep = sub.add_parser('sweep', help='Run every configuration in a sweep file')
    sweep.add_argument('file', help="YAML, JSON or TOML file with 'runs' and optional 'defaults'")
    sweep.add_argument('--output-dir', dest='output_dir')

    table = sub.add_parser('table', help='Print a report.json as an aligned table')
    table.add_argument('report', help='Path to report.json')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        if args.command == 'table':
            report = load_report(args.report)
            print(format_table(report))
            return 0
        if args.command == 'sweep':
            reports = run_sweep(args.file, args.output_dir)
            for report in reports:
                cfg = report.config
                print(f"{cfg['problem']} {cfg['discretization']}/{cfg['solver']} p={cfg['order']}")
                print(format_table(report))
                print()
            return _exit_code(reports)

        report = run_benchmark(_config_from_args(args))
        if args.json:
            print(json.dumps(report.to_dict(), indent=2))
        else:
            print(format_table(report))
        for message in report.errors:
            print(f"ERROR: {message}", file=sys.stderr)
        return _exit_code([report])
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
