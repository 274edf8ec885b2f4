import json
import math

import numpy as np
import pytest

from scinc.models.problems import DualConicProblem, PrimalProblem, SaddleProblem
from scinc.models.schemas import TRACE_COLUMNS, Family, Phase, ProblemSpec, SolveTrace, TraceRow
from scinc.repositories.problem_repository import ProblemRepository
from scinc.repositories.trace_repository import TraceRepository
from scinc.services.problem_service import generate
from scinc.utils.errors import TraceFormatError, UsageError


@pytest.mark.parametrize("spec,kind", [
    (ProblemSpec(family=Family.MAX_EIGENVALUE, dims={"n": 3, "p": 2}, seed=4), SaddleProblem),
    (ProblemSpec(family=Family.SPARSE_LOWRANK, dims={"n": 4}, seed=4), PrimalProblem),
    (ProblemSpec(family=Family.CLUSTER_RECOVERY, dims={"k": 3, "clusters": 2}, seed=4), DualConicProblem),
])
def test_problem_document_round_trip(tmp_path, spec, kind):
    repo = ProblemRepository()
    problem = generate(spec)
    path = str(tmp_path / "sub" / "problem.json")
    repo.save_problem(path, problem, spec)

    loaded, loaded_spec = repo.load_problem(path)
    assert isinstance(loaded, kind)
    assert loaded_spec == spec
    assert (loaded.start is None) == (problem.start is None)
    if problem.start is not None:
        assert np.array_equal(loaded.start, problem.start)
    assert loaded.barrier().nu == problem.barrier().nu
    for name, value in problem.data.items():
        if isinstance(value, np.ndarray):
            assert isinstance(loaded.data[name], np.ndarray)
            assert np.array_equal(loaded.data[name], value)


def test_problem_document_version_is_checked(tmp_path):
    repo = ProblemRepository()
    spec = ProblemSpec(family=Family.LINEAR_ORTHANT, dims={"n": 2})
    path = tmp_path / "p.json"
    repo.save_problem(str(path), generate(spec), spec)
    document = json.loads(path.read_text(encoding="utf-8"))
    document["format_version"] = 2
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(UsageError):
        repo.load_problem(str(path))


def test_problem_document_read_errors(tmp_path):
    repo = ProblemRepository()
    with pytest.raises(UsageError):
        repo.load_problem(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{ no es json", encoding="utf-8")
    with pytest.raises(UsageError):
        repo.load_problem(str(broken))
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"format_version": 1, "kind": "otro",
                                   "spec": {"family": "linear_orthant"}, "problem": {}}), encoding="utf-8")
    with pytest.raises(UsageError):
        repo.load_problem(str(unknown))


# --------------------------------------------------------------------------- trazas

def _trace():
    return SolveTrace(rows=[
        TraceRow(phase=Phase.ONE, k=0, t=1.0, lambda_=0.02),
        TraceRow(phase=Phase.ONE, k=1, t=0.5, lambda_=0.01, delta_target=1e-4, delta_achieved=2e-5, sigma=0.5),
        TraceRow(phase=Phase.TWO, k=0, t=10.0, lambda_=0.05, wall_ms=1.5),
        TraceRow(phase=Phase.TWO, k=1, t=9.0, lambda_=0.03, delta_target=1e-3, delta_achieved=1e-6,
                 sigma=0.1, residual_primary=2.0, residual_aux=0.04, wall_ms=0.7),
    ])


def test_trace_round_trip_keeps_rows_and_nan(tmp_path):
    repo = TraceRepository()
    path = str(tmp_path / "out" / "run.trace.csv")
    repo.write_trace(path, _trace())
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    assert header.split(",") == TRACE_COLUMNS

    trace = repo.read_trace(path)
    assert [r.phase for r in trace.rows] == [Phase.ONE, Phase.ONE, Phase.TWO, Phase.TWO]
    assert trace.count(Phase.TWO) == 1
    assert trace.rows[3].lambda_ == pytest.approx(0.03)
    assert trace.rows[3].residual_aux == pytest.approx(0.04)
    assert math.isnan(trace.rows[0].sigma)
    assert math.isnan(trace.rows[2].residual_primary)
    assert trace.is_monotone()


def test_trace_missing_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("phase,k,t\ntwo,0,1.0\n", encoding="utf-8")
    with pytest.raises(TraceFormatError) as info:
        TraceRepository().read_trace(str(path))
    assert info.value.line == 1
    assert info.value.field == "lambda"


def test_trace_bad_value_reports_line_and_field(tmp_path):
    repo = TraceRepository()
    path = tmp_path / "t.csv"
    repo.write_trace(str(path), _trace())
    lines = path.read_text(encoding="utf-8").splitlines()
    cells = lines[3].split(",")
    cells[TRACE_COLUMNS.index("t")] = "abc"
    lines[3] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with pytest.raises(TraceFormatError) as info:
        repo.read_trace(str(path))
    assert info.value.line == 4
    assert info.value.field == "t"
    assert info.value.exit_code == 1


def test_trace_missing_file(tmp_path):
    with pytest.raises(TraceFormatError):
        TraceRepository().read_trace(str(tmp_path / "nada.csv"))
