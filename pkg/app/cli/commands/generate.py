"""generate 子命令"""
import argparse

from app.analysis.report import emit, to_json
from app.chains.generators import PRESETS, make_phased, preset
from app.chains.model_io import model_to_dict
from app.chains.tails import TailDistribution
from app.cli.commands.common import add_output_argument
from app.settings import Settings

NAME = "generate"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="生成模型 JSON")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(PRESETS), help="预置模型")
    source.add_argument("--phased", nargs=3, type=int, metavar=("M0", "M1", "SEED"), help="随机多相位模型")
    parser.add_argument("--tail", default=None, help="参数尾, 如 pareto:3,1 (仅 --phased)")
    parser.add_argument("--drift", type=float, default=-0.3, help="目标漂移 σ (仅 --phased)")
    parser.add_argument("--full-rank-down", action="store_true", help="A(−1) 不取秩一")
    add_output_argument(parser)
    return parser


def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.preset:
        model = preset(args.preset)
    else:
        m0, m1, seed = args.phased
        tail = TailDistribution.parse(args.tail) if args.tail else None
        model = make_phased(
            m0, m1, seed, tail, args.drift,
            rank_one=not args.full_rank_down,
            name=f"phased-{m0}x{m1}-seed{seed}",
        )
    emit(to_json(model_to_dict(model)), args.output)
    return 0
