"""sweep 子命令"""
import argparse
import logging

from app.analysis.asymptotics import convergence_sweep
from app.analysis.report import emit, sweep_csv
from app.chains.tails import TailDistribution
from app.cli.commands.common import add_model_argument, add_output_argument, int_list, open_model
from app.settings import Settings

NAME = "sweep"

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="在 N 网格上扫描截断误差比值")
    add_model_argument(parser)
    parser.add_argument("--grid", type=int_list, required=True, help="N 网格, 如 32,64,128,256")
    parser.add_argument("--kmax", type=int, default=None, help="最大层号 (默认取配置)")
    parser.add_argument("--ref", required=True, help="参考分布, 如 pareto:2,1")
    parser.add_argument("--nref", type=int, default=None, help="参考截断参数 (默认 ref_factor·max(N))")
    add_output_argument(parser)
    return parser


def run(args: argparse.Namespace, settings: Settings) -> int:
    model = open_model(args.model, settings)
    reference = TailDistribution.parse(args.ref)
    k_max = settings.k_max if args.kmax is None else args.kmax
    n_ref = args.nref if args.nref is not None else settings.ref_factor * max(args.grid)
    report = convergence_sweep(model, reference, args.grid, k_max, n_ref, settings=settings)
    summary = report.to_dict()
    logger.info("θ=%.10g, θ_DI=%.10g, 标记: %s", summary["theta"], summary["theta_di"], summary["flags"] or "无")
    emit(sweep_csv(report), args.output)
    return 0
