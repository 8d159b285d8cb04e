"""
glsim: 随机 Ginzburg-Landau 方程模拟与统计检验工具
主包初始化文件
"""

__version__ = "0.1.0"
