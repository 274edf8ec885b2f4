import os
from typing import List

import pandas as pd
from pydantic import ValidationError

from scinc.models.schemas import TRACE_COLUMNS, SolveTrace, TraceRow
from scinc.utils.errors import TraceFormatError
from scinc.utils.logger import app_logger


class TraceRepository:
    """Trazas CSV: una fila por iteración externa, cabecera fija."""

    def write_trace(self, path: str, trace: SolveTrace) -> None:
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        frame = trace.to_frame()
        frame.to_csv(path, index=False, na_rep="nan")
        app_logger.info(f"Traza con {len(frame)} filas escrita en {path}")

    def read_trace(self, path: str) -> SolveTrace:
        try:
            frame = pd.read_csv(path, dtype={"phase": str}, keep_default_na=True)
        except FileNotFoundError:
            raise TraceFormatError(f"No existe la traza {path}")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise TraceFormatError(f"Traza ilegible {path}: {e}")

        missing: List[str] = [c for c in TRACE_COLUMNS if c not in frame.columns]
        if missing:
            raise TraceFormatError(f"Faltan columnas en {path}", line=1, field=missing[0])

        rows = []
        for idx, record in enumerate(frame[TRACE_COLUMNS].to_dict(orient="records")):
            line = idx + 2  # cabecera en la línea 1
            try:
                rows.append(TraceRow(**record))
            except ValidationError as e:
                field = str(e.errors()[0]["loc"][0]) if e.errors() else None
                raise TraceFormatError(f"Valor inválido en la traza {path}", line=line, field=field)
        return SolveTrace(rows=rows)
