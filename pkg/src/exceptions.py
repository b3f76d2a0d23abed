"""
선호 완성(preference completion) 라이브러리 예외 처리 클래스
"""
from typing import Optional, Dict, Any, List


class PreferenceCompletionException(Exception):
    """선호 완성 라이브러리 기본 예외 클래스"""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """예외를 딕셔너리로 변환"""
        return {
            "message": self.message,
            "error_code": self.error_code,
            "details": self.details,
            "exception_type": self.__class__.__name__
        }


class ValidationException(PreferenceCompletionException):
    """유효성 검증 예외"""

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        value: Optional[Any] = None,
        validation_errors: Optional[List[Dict[str, str]]] = None,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, error_code, details)
        self.field = field
        self.value = value
        self.validation_errors = validation_errors or []

    def add_error(self, field: str, error: str):
        """유효성 검증 오류 추가"""
        self.validation_errors.append({
            "field": field,
            "error": error
        })

    def has_multiple_errors(self) -> bool:
        """여러 오류가 있는지 확인"""
        return len(self.validation_errors) > 1

    def to_dict(self) -> Dict[str, Any]:
        """예외를 딕셔너리로 변환"""
        result = super().to_dict()
        result.update({
            "field": self.field,
            "value": self.value,
            "validation_errors": self.validation_errors
        })
        return result


class IndexOutOfRangeException(ValidationException):
    """아이템/사용자 인덱스 범위 초과"""

    def __init__(self, message: str, field: Optional[str] = None, value: Optional[Any] = None,
                 limit: Optional[int] = None):
        super().__init__(message, field=field, value=value, error_code="INDEX_OUT_OF_RANGE")
        self.limit = limit

    def to_dict(self) -> Dict[str, Any]:
        result = super().to_dict()
        result["limit"] = self.limit
        return result


class DuplicateEntryException(ValidationException):
    """같은 (item, user) 키가 두 번 관측됨"""

    def __init__(self, item: int, user: int):
        super().__init__(
            f"Duplicate entry for item {item}, user {user}",
            field="entries",
            value=(item, user),
            error_code="DUPLICATE_ENTRY"
        )
        self.item = item
        self.user = user

    def to_dict(self) -> Dict[str, Any]:
        result = super().to_dict()
        result.update({"item": self.item, "user": self.user})
        return result


class SameUserException(ValidationException):
    """두 사용자 인자가 동일함"""

    def __init__(self, user: int):
        super().__init__(f"Expected two distinct users, got {user} twice",
                         field="user", value=user, error_code="SAME_USER")


class SameItemException(ValidationException):
    """두 아이템 인자가 동일함"""

    def __init__(self, item: int):
        super().__init__(f"Expected two distinct items, got {item} twice",
                         field="item", value=item, error_code="SAME_ITEM")


class MalformedPreferenceMatrixException(ValidationException):
    """반대칭 조건을 위반한 선호 행렬"""

    def __init__(self, message: str, pairs: Optional[List[tuple]] = None):
        super().__init__(message, field="bits", error_code="MALFORMED_PREFERENCE_MATRIX",
                         details={"pairs": pairs or []})


class InvalidPermutationException(ValidationException):
    """순열이 아닌 랭킹"""

    def __init__(self, message: str, user: Optional[int] = None):
        super().__init__(message, field="ranks", value=user, error_code="INVALID_PERMUTATION")
        self.user = user


class ShapeMismatchException(ValidationException):
    """배열 크기 불일치"""

    def __init__(self, message: str, expected: Optional[tuple] = None, actual: Optional[tuple] = None):
        super().__init__(message, error_code="SHAPE_MISMATCH",
                         details={"expected": expected, "actual": actual})
        self.expected = expected
        self.actual = actual


class InvalidModelConfigException(ValidationException):
    """잠재 모델/랭커 설정 오류"""

    def __init__(self, message: str, field: Optional[str] = None, value: Optional[Any] = None):
        super().__init__(message, field=field, value=value, error_code="INVALID_CONFIG")


class MetricException(PreferenceCompletionException):
    """랭킹 지표 계산 불가 예외"""

    def __init__(
        self,
        message: str,
        metric: Optional[str] = None,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, error_code, details)
        self.metric = metric

    def to_dict(self) -> Dict[str, Any]:
        result = super().to_dict()
        result["metric"] = self.metric
        return result


class InsufficientPairsException(MetricException):
    """비교 가능한 쌍이 부족함"""

    def __init__(self, message: str, metric: Optional[str] = None):
        super().__init__(message, metric=metric, error_code="INSUFFICIENT_PAIRS")


class ConstantTruthException(MetricException):
    """정답 평점이 모두 같아 상관계수가 정의되지 않음"""

    def __init__(self, message: str, metric: Optional[str] = None):
        super().__init__(message, metric=metric, error_code="CONSTANT_TRUTH")


class InsufficientItemsException(MetricException):
    """컷오프보다 적은 테스트 아이템"""

    def __init__(self, message: str, metric: Optional[str] = None):
        super().__init__(message, metric=metric, error_code="INSUFFICIENT_ITEMS")


class DataException(PreferenceCompletionException):
    """데이터 파일/전처리 관련 예외"""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, error_code, details)
        self.path = path
        self.line = line

    def to_dict(self) -> Dict[str, Any]:
        """예외를 딕셔너리로 변환"""
        result = super().to_dict()
        result.update({
            "path": self.path,
            "line": self.line
        })
        return result


class ParseException(DataException):
    """평점 파일 파싱 실패"""

    def __init__(self, message: str, line: int, path: Optional[str] = None):
        super().__init__(message, path=path, line=line, error_code="PARSE_ERROR")


class EmptyFileException(DataException):
    """빈 평점 파일"""

    def __init__(self, path: Optional[str] = None):
        super().__init__(f"No ratings found in {path}", path=path, error_code="EMPTY_FILE")


class NotEnoughQualifyingUsersException(DataException):
    """인기도 필터 조건을 만족하는 사용자가 부족함"""

    def __init__(self, requested: int, available: int):
        super().__init__(
            f"Requested {requested} users but only {available} qualify",
            error_code="NOT_ENOUGH_USERS",
            details={"requested": requested, "available": available}
        )
        self.requested = requested
        self.available = available


class ConfigurationException(PreferenceCompletionException):
    """설정 관련 예외"""

    def __init__(
        self,
        message: str,
        config_key: Optional[str] = None,
        config_section: Optional[str] = None,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, error_code, details)
        self.config_key = config_key
        self.config_section = config_section

    def to_dict(self) -> Dict[str, Any]:
        """예외를 딕셔너리로 변환"""
        result = super().to_dict()
        result.update({
            "config_key": self.config_key,
            "config_section": self.config_section
        })
        return result


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3


def exit_code_for(error: Exception) -> int:
    """CLI 종료 코드: 설정 오류 2, 데이터 오류 3, 그 외 1"""
    if isinstance(error, (ConfigurationException, InvalidModelConfigException)):
        return EXIT_CONFIG_ERROR
    if isinstance(error, DataException):
        return EXIT_DATA_ERROR
    return EXIT_FAILURE
