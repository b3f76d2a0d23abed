# 선호 완성 (Multi-Rank) 패키지