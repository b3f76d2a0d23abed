"""
평점 파일 로더

MovieLens `.dat` (uid::mid::rating::timestamp) 와 CSV 삼중항 (user,item,rating)
"""
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.models import SparseRatingMatrix
from ..exceptions import DataException, DuplicateEntryException, EmptyFileException, ParseException

logger = logging.getLogger(__name__)

COLUMNS = ["user", "item", "rating"]
_LINE_PATTERN = re.compile(r"line (\d+)")


class RatingFormat(str, Enum):
    MOVIELENS_DAT = "movielens_dat"
    CSV_TRIPLES = "csv_triples"


def natural_key(identifier: str) -> Tuple[int, Any]:
    """숫자 ID는 수치 순, 나머지는 문자열 순 (숫자 먼저)"""
    return (0, int(identifier)) if identifier.isdigit() else (1, identifier)


def natural_sorted(identifiers: Iterable[str]) -> List[str]:
    return sorted(identifiers, key=natural_key)


@dataclass(frozen=True, eq=False)
class RatingTriples:
    """원시 ID (user, item, rating) 프레임"""
    frame: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in COLUMNS if c not in self.frame.columns]
        if missing:
            raise DataException(f"Rating frame is missing columns {missing}")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def n_users(self) -> int:
        return int(self.frame["user"].nunique())

    @property
    def n_items(self) -> int:
        return int(self.frame["item"].nunique())

    def records(self) -> List[Tuple[str, str, float]]:
        return [(u, i, float(r)) for u, i, r in self.frame[COLUMNS].itertuples(index=False, name=None)]

    @classmethod
    def from_records(cls, records: Sequence[Tuple[Any, Any, float]]) -> "RatingTriples":
        frame = pd.DataFrame(
            [(str(u), str(i), float(r)) for u, i, r in records],
            columns=COLUMNS,
        )
        frame["rating"] = frame["rating"].astype(np.float64)
        return cls(frame)


@dataclass(frozen=True, eq=False)
class RatingDataset:
    """밀집 인덱스 행렬과 원시 ID 매핑"""
    matrix: SparseRatingMatrix
    user_ids: List[str]
    item_ids: List[str]

    @classmethod
    def from_triples(cls, triples: RatingTriples) -> "RatingDataset":
        if len(triples) == 0:
            raise EmptyFileException()
        frame = triples.frame
        user_ids = natural_sorted(frame["user"].unique())
        item_ids = natural_sorted(frame["item"].unique())
        users = pd.Index(user_ids).get_indexer(frame["user"])
        items = pd.Index(item_ids).get_indexer(frame["item"])
        try:
            matrix = SparseRatingMatrix(len(item_ids), len(user_ids), items, users, frame["rating"].to_numpy(np.float64))
        except DuplicateEntryException as e:
            raise DataException(
                f"Duplicate rating for user {user_ids[e.user]}, item {item_ids[e.item]}",
                error_code="DUPLICATE_ENTRY",
            )
        return cls(matrix=matrix, user_ids=user_ids, item_ids=item_ids)

    def to_dict(self) -> Dict[str, Any]:
        return {"user_ids": self.user_ids, "item_ids": self.item_ids, "matrix": self.matrix.to_dict()}


def _read_frame(path: Path, fmt: RatingFormat) -> pd.DataFrame:
    if fmt == RatingFormat.MOVIELENS_DAT:
        options = {"sep": "::", "names": COLUMNS + ["timestamp"]}
    else:
        options = {"sep": ",", "names": COLUMNS}
    try:
        return pd.read_csv(
            path,
            header=None,
            dtype=str,
            encoding="utf-8",
            engine="python",
            skip_blank_lines=False,
            skipinitialspace=True,
            **options,
        )
    except pd.errors.EmptyDataError:
        raise EmptyFileException(str(path))
    except pd.errors.ParserError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else 0
        raise ParseException(f"Malformed ratings line {line} in {path}: {e}", line=line, path=str(path))
    except UnicodeDecodeError as e:
        raise DataException(f"Ratings file {path} is not valid UTF-8: {e}", path=str(path),
                            error_code="ENCODING_ERROR")
    except ValueError as e:
        raise DataException(f"Cannot parse ratings file {path}: {e}", path=str(path), error_code="PARSE_ERROR")
    except OSError as e:
        raise DataException(f"Cannot read ratings file {path}: {e}", path=str(path))


def parse_ratings(path: Union[str, Path], fmt: Union[RatingFormat, str] = RatingFormat.MOVIELENS_DAT) -> RatingTriples:
    """
    평점 파일 파싱

    Raises:
        ParseException: 필드 수/평점 형식이 잘못된 줄 (1부터 시작하는 줄 번호)
        EmptyFileException: 평점이 하나도 없을 때
    """
    path = Path(path)
    fmt = RatingFormat(fmt)
    frame = _read_frame(path, fmt)

    # 완전히 빈 줄은 무시. 인덱스는 원래 줄 번호 - 1 을 유지
    frame = frame[~frame[COLUMNS].isna().all(axis=1)].copy()

    if fmt == RatingFormat.CSV_TRIPLES and len(frame) and frame.index[0] == 0:
        first = frame.iloc[0]
        if str(first["rating"]).strip().lower() == "rating":
            frame = frame.iloc[1:].copy()

    if len(frame) == 0:
        raise EmptyFileException(str(path))

    for column in ("user", "item"):
        frame[column] = frame[column].str.strip()
    ratings = pd.to_numeric(frame["rating"], errors="coerce")
    bad = frame[COLUMNS].isna().any(axis=1) | ratings.isna() | (frame["user"] == "") | (frame["item"] == "")
    if bad.any():
        line = int(frame.index[bad.to_numpy()][0]) + 1
        raise ParseException(f"Malformed ratings line {line} in {path}", line=line, path=str(path))

    result = pd.DataFrame({
        "user": frame["user"].to_numpy(),
        "item": frame["item"].to_numpy(),
        "rating": ratings.to_numpy(np.float64),
    })
    logger.info(f"Parsed {len(result)} ratings from {path} ({fmt.value})")
    return RatingTriples(result)
