"""
核心功能模块
包含稳定噪声、谱表示、OU 过程、积分器、Riccati 比较与遍历统计
"""
