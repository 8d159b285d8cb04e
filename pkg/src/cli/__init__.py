"""
命令行接口模块
包含 CLI 命令定义
"""

from .commands import app as cli_app

__all__ = ['cli_app'] 