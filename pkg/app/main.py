# coding:utf-8
"""应用主入口"""
import logging
import sys
import os

# 添加项目根目录到 Python 路径
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.cli.commands import COMMANDS
from app.cli.parser import build_parser, overrides
from app.errors import (
    DimensionMismatch,
    InvalidModel,
    InvalidTail,
    MassMismatch,
    MG1Error,
    ModelFormatError,
)
from app.settings import load_settings

# 输入格式类错误, 退出码 2
FORMAT_ERRORS = (ModelFormatError, DimensionMismatch, InvalidModel, InvalidTail, MassMismatch)

logger = logging.getLogger("app")


def _log_level(verbose: int, configured: str) -> int:
    if verbose >= 2:
        return logging.DEBUG
    if verbose == 1:
        return logging.INFO
    return getattr(logging, configured.upper(), logging.WARNING)


def main(argv=None) -> int:
    """主函数, 返回退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings(args.config).with_overrides(**overrides(args))
    except (OSError, ValueError) as exc:
        print(f"配置文件读取失败: {exc}", file=sys.stderr)
        return 2

    # 日志只写到 stderr, stdout 留给结果输出
    logging.basicConfig(
        level=_log_level(args.verbose, settings.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    command = COMMANDS[args.command]
    try:
        return command.run(args, settings)
    except FORMAT_ERRORS as exc:
        print(f"模型格式错误: {exc}", file=sys.stderr)
        return 2
    except MG1Error as exc:
        logger.debug("命令 %s 失败", args.command, exc_info=True)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"参数错误: {exc}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
