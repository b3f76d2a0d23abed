# 합성 잠재 모델 패키지