import sys
from typing import List, Optional

try:
    # typer>=0.2x 内置了 click 的副本，异常类来自 typer._click
    from typer._click import exceptions as click_exceptions
except ImportError:
    from click import exceptions as click_exceptions

from src.cli.commands import app as cli_app
from src.core.config import EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口，返回进程退出码（用法错误为 64）"""
    try:
        result = cli_app(args=argv, prog_name="glsim", standalone_mode=False)
    except click_exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click_exceptions.Exit as e:
        return e.exit_code
    except click_exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
