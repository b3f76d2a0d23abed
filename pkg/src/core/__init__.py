# 핵심 데이터 모델