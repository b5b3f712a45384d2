"""validate 子命令"""
import argparse

from app.analysis.report import emit, to_json
from app.cli.commands.common import add_model_argument, add_output_argument, open_model
from app.chains.model import validate
from app.settings import Settings

NAME = "validate"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="校验模型并输出 JSON 报告")
    add_model_argument(parser)
    add_output_argument(parser)
    return parser


def run(args: argparse.Namespace, settings: Settings) -> int:
    """无缺陷时返回 0, 否则返回 1"""
    model = open_model(args.model, settings)
    tol = settings.tolerances
    report = validate(model, eps_stoch=tol.eps_stoch, eps_solve=tol.eps_solve)
    emit(to_json(report.to_dict()), args.output)
    return 0 if report.ok else 1
