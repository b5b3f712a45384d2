"""solve 子命令"""
import argparse
import logging

from app.analysis.report import emit, solution_csv
from app.cli.commands.common import add_model_argument, add_output_argument, open_model
from app.settings import Settings
from app.solvers.mam import ramaswami_pi
from app.solvers.truncation import pi_truncated

NAME = "solve"

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="用 Ramaswami 递推求 π(k) 并输出 CSV")
    add_model_argument(parser)
    parser.add_argument("--horizon", type=int, default=20, help="最高层 K_h (默认 20)")
    parser.add_argument("--truncate", type=int, default=None, metavar="N", help="先做 LI 截断")
    add_output_argument(parser)
    return parser


def run(args: argparse.Namespace, settings: Settings) -> int:
    model = open_model(args.model, settings)
    if args.truncate is not None:
        solution = pi_truncated(model, args.truncate, args.horizon, settings=settings)
    else:
        solution = ramaswami_pi(model, args.horizon, settings=settings)
    logger.info("质量 %.15f, 尾界 %.3e, 抽查残差 %.3e", solution.mass, solution.tail_mass_bound, solution.residual)
    emit(solution_csv(solution), args.output)
    return 0
