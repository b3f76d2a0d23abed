"""
실험 리포트 저장

JSON 문서 하나와 그래프용 평면 CSV. 같은 입력이면 바이트 단위로 같은 파일을 쓴다
(키 정렬, 타임스탬프 없음, NaN은 null).
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..exceptions import PreferenceCompletionException


def to_builtin(value: Any) -> Any:
    """numpy 값/배열을 JSON 호환 파이썬 값으로 변환"""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


class ReportWriter:
    """리포트 파일 관리자"""

    def __init__(self, directory: str, name: str = "report"):
        self.directory = Path(directory)
        self.name = name
        self.logger = logging.getLogger(__name__)

    def _path(self, suffix: str, extension: str) -> Path:
        stem = f"{self.name}_{suffix}" if suffix else self.name
        return self.directory / f"{stem}.{extension}"

    def initialize(self) -> None:
        """출력 디렉터리 생성"""
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise PreferenceCompletionException(
                f"Cannot create output directory {self.directory}",
                error_code="OUTPUT_ERROR",
                details={"error": str(e)},
            )

    @staticmethod
    def dumps(payload: Dict[str, Any]) -> str:
        return json.dumps(to_builtin(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def write_json(self, payload: Dict[str, Any], suffix: str = "") -> Path:
        path = self._path(suffix, "json")
        path.write_text(self.dumps(payload), encoding="utf-8")
        self.logger.info(f"Wrote {path}")
        return path

    def write_csv(self, rows: Sequence[Dict[str, Any]], suffix: str = "",
                  columns: Optional[List[str]] = None) -> Path:
        path = self._path(suffix, "csv")
        frame = pd.DataFrame([to_builtin(row) for row in rows], columns=columns)
        frame.to_csv(path, index=False, lineterminator="\n")
        self.logger.info(f"Wrote {path} ({len(frame)} rows)")
        return path
