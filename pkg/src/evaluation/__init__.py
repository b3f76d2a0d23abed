# 평가 지표 패키지