import math

import pytest

from scinc.models.schemas import Family, Phase, ProblemSpec, RunConfig, Scheme
from scinc.repositories.problem_repository import ProblemRepository
from scinc.repositories.trace_repository import TraceRepository
from scinc.services.problem_service import generate
from scinc.services.report_service import REPORT_COLUMNS, ReportService, sibling_solution_paths
from scinc.services.solve_service import SolveService, default_output_paths
from scinc.services.verify_service import verify_trace


@pytest.fixture
def solved(tmp_path):
    spec = ProblemSpec(family=Family.LINEAR_ORTHANT, dims={"n": 2})
    path = str(tmp_path / "lin.json")
    ProblemRepository().save_problem(path, generate(spec), spec)
    solution, trace = SolveService().run(RunConfig(problem_path=path, scheme=Scheme.ALGORITHM1, eps=1e-4))
    return path, solution, trace


def test_default_output_paths():
    assert default_output_paths("runs/a.json") == ("runs/a.solution.json", "runs/a.trace.csv")


def test_clean_run_passes_verification(solved):
    path, solution, trace = solved
    report = verify_trace(solution, trace)
    assert report.passed, report.failures
    assert report.checks_run > 0
    assert "vecindad_beta" in report.summary
    assert solution.phase2_iters == trace.count(Phase.TWO)
    assert solution.phase2_iters <= solution.k_max

    # lo escrito en disco verifica igual
    out_path, trace_path = default_output_paths(path)
    stored = ProblemRepository().load_solution(out_path)
    assert verify_trace(stored, TraceRepository().read_trace(trace_path)).passed


def test_corrupted_decrement_fails(solved):
    _, solution, trace = solved
    rows = trace.phase_rows(Phase.TWO)
    rows[-1].lambda_ = 10.0 * solution.schedule.beta
    report = verify_trace(solution, trace)
    assert not report.passed
    assert any(f.name == "vecindad_beta" for f in report.failures)


def test_corrupted_contraction_fails(solved):
    _, solution, trace = solved
    rows = [r for r in trace.phase_rows(Phase.TWO) if r.k > 0]
    rows[0].t *= 1.01
    report = verify_trace(solution, trace)
    assert any(f.name == "contraccion_t" for f in report.failures)


def test_empty_report_has_columns():
    frame = ReportService().build_report([])
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.empty


def test_sibling_solution_paths():
    assert sibling_solution_paths("runs/a.trace.csv") == [
        "runs/a.solution.json", "runs/a.json", "runs/a.trace.solution.json", "runs/a.trace.json",
    ]
    assert sibling_solution_paths("b.csv") == ["b.solution.json", "b.json"]


def test_report_summarizes_run(solved):
    path, solution, _ = solved
    _, trace_path = default_output_paths(path)
    frame = ReportService().build_report([trace_path, trace_path])
    assert len(frame) == 1
    row = frame.iloc[0]
    assert row["scheme"] == "algorithm1"
    assert row["phase2_iters"] == solution.phase2_iters
    assert bool(row["within_budget"])
    assert row["t_final"] == pytest.approx(solution.t_final)
    assert math.isfinite(row["time_ms"])


def test_report_exports_excel(solved, tmp_path):
    path, _, _ = solved
    _, trace_path = default_output_paths(path)
    service = ReportService()
    xlsx = tmp_path / "report.xlsx"
    text = service.export(service.build_report([trace_path]), xlsx_path=str(xlsx))
    assert text.splitlines()[0].split(",") == REPORT_COLUMNS
    assert xlsx.exists()


def test_schedule_curve_table():
    frame = ReportService().schedule_curve_table(0.95, 1000.0, points=49)
    assert len(frame) == 49
    assert list(frame.columns) == ["beta", "delta_t_bar", "sigma_bar"]
    best = frame.loc[frame["sigma_bar"].idxmax(), "beta"]
    assert best == pytest.approx(0.087, abs=0.01)
