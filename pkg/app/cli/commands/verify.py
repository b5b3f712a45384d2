"""verify 子命令: 基于有限链的数值校验"""
import argparse
import logging
from typing import Any, Dict, Sequence

from app.analysis.report import emit, to_json
from app.chains.model import MG1Model
from app.cli.commands.common import add_model_argument, add_output_argument, int_list, open_model
from app.settings import Settings
from app.solvers.oracle import truncation_delta, verify_difference_formula, verify_h_blocks, verify_u
from app.solvers.truncation import error_metrics, pi_truncated

NAME = "verify"

# 判定通过的阈值
RESIDUAL_TOL = 1e-6
TV_TOL = 1e-2
TV_GRID = (16, 32, 64, 128)
TV_REF_FACTOR = 64
TV_HORIZON_FACTOR = 8
TV_FINAL_N = 512
UK_REL_TOL = 1e-3

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="差分公式、u(m) 与收敛性校验")
    add_model_argument(parser)
    check = parser.add_mutually_exclusive_group(required=True)
    check.add_argument("--lemma41", nargs=3, type=int, metavar=("N", "K", "L"), help="逐层差分公式")
    check.add_argument("--uk", nargs=2, type=int, metavar=("M", "L"), help="u(m) 闭式与击中时间")
    check.add_argument("--thm41", action="store_true", help="全变差误差随 N 趋零")
    check.add_argument("--delta", nargs=2, type=int, metavar=("N", "L"), help="P⁽ᴺ⁾ − P 的块结构")
    check.add_argument("--hblocks", nargs=3, type=int, metavar=("M", "K", "L"), help="H(m;k) 块分解")
    parser.add_argument("--grid", type=int_list, default=list(TV_GRID), help="--thm41 的 N 网格, 要求 tv_total 严格递减")
    parser.add_argument("--final-n", type=int, default=TV_FINAL_N, help="--thm41 要求 tv_total < 1e-2 的 N (默认 512)")
    add_output_argument(parser)
    return parser


def _tv_row(model: MG1Model, n: int, settings: Settings) -> Dict[str, Any]:
    horizon = TV_HORIZON_FACTOR * n
    reference = pi_truncated(model, TV_REF_FACTOR * n, horizon, settings=settings)
    approx = pi_truncated(model, n, horizon, settings=settings)
    tv = error_metrics(reference, approx, horizon).tv_total
    logger.info("N=%d: tv_total=%.6e", n, tv)
    return {"n": n, "n_ref": TV_REF_FACTOR * n, "horizon": horizon, "tv_total": tv}


def tv_convergence(
    model: MG1Model,
    grid: Sequence[int],
    settings: Settings,
    final_n: int = TV_FINAL_N,
) -> Dict[str, Any]:
    """
    对每个 N 计算层 0..8N 上的 tv_total, 参考解取 N_ref = 64N

    通过条件: tv_total 在 grid 上严格递减, 且在 final_n 处小于 TV_TOL。

    Args:
        model: 模型
        grid: 严格递增的 N 网格
        settings: 配置
        final_n: 判定收敛阈值的 N

    Returns:
        {"rows", "final", "decreasing", "min_tv", "pass"}
    """
    rows = [_tv_row(model, n, settings) for n in grid]
    by_n = {row["n"]: row for row in rows}
    final = by_n.get(final_n) or _tv_row(model, final_n, settings)
    tv = [row["tv_total"] for row in rows]
    decreasing = all(later < earlier for earlier, later in zip(tv, tv[1:]))
    min_tv = min(tv + [final["tv_total"]])
    return {
        "rows": rows,
        "final": final,
        "decreasing": decreasing,
        "min_tv": min_tv,
        "pass": decreasing and final["tv_total"] < TV_TOL,
    }



def run(args: argparse.Namespace, settings: Settings) -> int:
    model = open_model(args.model, settings)
    if args.lemma41:
        n, k, level_cap = args.lemma41
        result = verify_difference_formula(model, n, k, level_cap, settings=settings)
        result["pass"] = result["residual"] < RESIDUAL_TOL
    elif args.uk:
        m, level_cap = args.uk
        result = verify_u(model, m, level_cap, settings=settings)
        # 多相位模型按相对误差判定
        if model.m1 == 1:
            result["pass"] = result["abs_error"] < RESIDUAL_TOL
        else:
            result["pass"] = result["rel_error"] < UK_REL_TOL
    elif args.delta:
        n, level_cap = args.delta
        result = truncation_delta(model, n, level_cap)
        result["pass"] = result["match"] and result["value_error"] < RESIDUAL_TOL
    elif args.hblocks:
        m, k, level_cap = args.hblocks
        result = verify_h_blocks(model, m, k, level_cap, settings=settings)
        result["pass"] = result["residual"] < RESIDUAL_TOL
    else:
        result = tv_convergence(model, args.grid, settings, args.final_n)
    emit(to_json(result), args.output)
    return 0 if result["pass"] else 1
