import json
import os
from typing import Any, Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from scinc.models.problems import DualConicProblem, PrimalProblem, SaddleProblem
from scinc.models.schemas import ProblemSpec, SolutionDocument
from scinc.oracles.barriers import barrier_from_descriptor
from scinc.oracles.prox import prox_from_descriptor
from scinc.utils.errors import UsageError
from scinc.utils.logger import app_logger

Problem = Union[SaddleProblem, PrimalProblem, DualConicProblem]
FORMAT_VERSION = 1


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return {"ndarray": value.tolist()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value) == {"ndarray"}:
            return np.asarray(value["ndarray"], dtype=float)
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def _array(value: Any, name: str) -> np.ndarray:
    try:
        return np.asarray(_decode(value), dtype=float)
    except (TypeError, ValueError) as e:
        raise UsageError(f"Campo {name} no es una matriz numérica: {e}")


class ProblemRepository:
    """Documentos JSON de problema y solución con `format_version: 1`."""

    def _write(self, path: str, document: Dict[str, Any]) -> None:
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(document, fh, indent=1, sort_keys=True, allow_nan=False)
            fh.write("\n")

    def _read(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                document = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"No existe el archivo {path}")
        except json.JSONDecodeError as e:
            raise UsageError(f"JSON inválido en {path}: línea {e.lineno}, columna {e.colno}")
        if document.get("format_version") != FORMAT_VERSION:
            raise UsageError(f"Versión de formato no soportada en {path}: {document.get('format_version')!r}")
        return document

    def to_document(self, problem: Problem, spec: ProblemSpec) -> Dict[str, Any]:
        if isinstance(problem, SaddleProblem):
            kind = "saddle"
            body = {
                "g": problem.g.to_descriptor(), "psi": problem.psi.to_descriptor(),
                "f": problem.f.to_descriptor(), "phi": problem.phi.to_descriptor(),
                "L": problem.L.tolist(),
            }
        elif isinstance(problem, PrimalProblem):
            kind = "primal"
            body = {"g": problem.g.to_descriptor(), "f": problem.f.to_descriptor()}
        else:
            kind = "dual"
            body = {
                "g": problem.g.to_descriptor(), "f": problem.f.to_descriptor(),
                "L": problem.L.tolist(), "b": problem.b.tolist(), "c_obj": problem.c_obj.tolist(),
            }
        body["start"] = None if problem.start is None else problem.start.tolist()
        body["data"] = _encode(problem.data)
        return {
            "format_version": FORMAT_VERSION,
            "kind": kind,
            "spec": spec.model_dump(mode="json"),
            "problem": body,
        }

    def from_document(self, document: Dict[str, Any]) -> Tuple[Problem, ProblemSpec]:
        try:
            spec = ProblemSpec(**document["spec"])
            body = document["problem"]
            kind = document["kind"]
            start = None if body.get("start") is None else _array(body["start"], "start")
            common = {"family": spec.family, "start": start, "data": _decode(body.get("data", {}))}
            if kind == "saddle":
                problem = SaddleProblem(
                    g=prox_from_descriptor(body["g"]), psi=prox_from_descriptor(body["psi"]),
                    f=barrier_from_descriptor(body["f"]), phi=barrier_from_descriptor(body["phi"]),
                    L=_array(body["L"], "L"), **common,
                )
            elif kind == "primal":
                problem = PrimalProblem(g=prox_from_descriptor(body["g"]), f=barrier_from_descriptor(body["f"]),
                                        **common)
            elif kind == "dual":
                problem = DualConicProblem(
                    g=prox_from_descriptor(body["g"]), f=barrier_from_descriptor(body["f"]),
                    L=_array(body["L"], "L"), b=_array(body["b"], "b"), c_obj=_array(body["c_obj"], "c_obj"),
                    **common,
                )
            else:
                raise UsageError(f"Tipo de problema desconocido: {kind!r}")
        except KeyError as e:
            raise UsageError(f"Falta el campo {e} en el documento de problema")
        except ValidationError as e:
            raise UsageError(f"Documento de problema inconsistente: {e}")
        return problem, spec

    def save_problem(self, path: str, problem: Problem, spec: ProblemSpec) -> None:
        self._write(path, self.to_document(problem, spec))
        app_logger.info(f"Problema guardado en {path}")

    def load_problem(self, path: str) -> Tuple[Problem, ProblemSpec]:
        problem, spec = self.from_document(self._read(path))
        app_logger.info(f"Problema cargado desde {path} ({spec.family.value})")
        return problem, spec

    def save_solution(self, path: str, solution: SolutionDocument) -> None:
        self._write(path, solution.model_dump(mode="json"))
        app_logger.info(f"Solución guardada en {path}")

    def load_solution(self, path: str) -> SolutionDocument:
        try:
            return SolutionDocument(**self._read(path))
        except ValidationError as e:
            raise UsageError(f"Documento de solución inválido en {path}: {e}")
