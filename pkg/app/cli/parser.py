"""命令行参数定义"""
import argparse

from app import __version__
from app.cli.commands import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    """
    构建顶层解析器并注册全部子命令

    Returns:
        argparse.ArgumentParser
    """
    parser = argparse.ArgumentParser(
        prog="mg1",
        description="M/G/1 型马尔可夫链: Ramaswami 递推、LI 截断与误差渐近分析",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="配置文件, 默认 config/settings.json")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v 为 INFO, -vv 为 DEBUG")
    parser.add_argument("--workers", type=int, default=None, help="sweep 并发数 (覆盖 MG1_WORKERS)")

    tol = parser.add_argument_group("数值容差")
    tol.add_argument("--eps-stoch", type=float, default=None)
    tol.add_argument("--eps-tail", type=float, default=None)
    tol.add_argument("--eps-solve", type=float, default=None)
    tol.add_argument("--eps-check", type=float, default=None)
    tol.add_argument("--eps-g", type=float, default=None)
    tol.add_argument("--eps-mass", type=float, default=None)

    subparsers = parser.add_subparsers(dest="command", metavar="命令")
    subparsers.required = True
    for module in COMMANDS.values():
        module.register(subparsers)
    return parser


def overrides(args: argparse.Namespace) -> dict:
    """命令行给出的配置覆盖项, 未给出的为 None"""
    return {
        "workers": args.workers,
        "eps_stoch": args.eps_stoch,
        "eps_tail": args.eps_tail,
        "eps_solve": args.eps_solve,
        "eps_check": args.eps_check,
        "eps_g": args.eps_g,
        "eps_mass": args.eps_mass,
    }
