# 순위 추정 패키지