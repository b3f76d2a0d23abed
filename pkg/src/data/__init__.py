# 평점 데이터 패키지