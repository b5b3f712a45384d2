"""次几何收敛公式: 参考尾分布、极限常数、NLS 分布与收敛扫描"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.chains.model import MG1Model
from app.chains.tails import ParetoTail, TailDistribution
from app.errors import DegenerateLimit, Divergent, HorizonTooShort, ReferenceMismatch
from app.settings import DEFAULT_SETTINGS, Settings
from app.solvers.mam import StationarySolution
from app.solvers.truncation import pi_truncated

logger = logging.getLogger(__name__)

LONG_TAIL_TOL = 1e-2
DIVERGENCE_LIMIT = 1e6
ZERO_LIMIT = 1e-10
# 网格末两点比值的相对变化上限, 超出即视为极限不存在或为零
C_RESIDUAL_TOL = 0.5
MAX_CONVOLUTION = 100_000


def tail_value(distribution: TailDistribution, k: int) -> float:
    """F̄(k)"""
    return distribution.tail(k)


@dataclass(frozen=True, eq=False)
class LongTailTable:
    """F̄(k+n)/F̄(k) 比值表"""

    ks: np.ndarray
    ratios: np.ndarray
    long_tailed: bool


def is_long_tailed_numeric(distribution: TailDistribution, n_shift: int, k_probe: Sequence[int]) -> LongTailTable:
    """
    长尾性数值探查

    Args:
        distribution: 参考分布
        n_shift: 平移量 n
        k_probe: 递增的探查点

    Returns:
        LongTailTable; 末点比值与 1 相差不超过 1e-2 时判为长尾
    """
    ks = np.asarray(k_probe, dtype=np.int64)
    if ks.size == 0 or np.any(np.diff(ks) <= 0):
        raise ValueError("k_probe 必须非空且严格递增")
    base = distribution.require_positive(ks)
    shifted = distribution.require_positive(ks + n_shift)
    ratios = shifted / base
    return LongTailTable(ks=ks, ratios=ratios, long_tailed=bool(abs(ratios[-1] - 1.0) <= LONG_TAIL_TOL))


def subexponential_ratio(distribution: TailDistribution, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    F̄*²(k)/F̄(k), k = 0..k_max, 其中 F̄*²(k) = F̄(k) + Σ_{j≤k} p(j)F̄(k−j)

    Args:
        distribution: 参考分布
        k_max: 最大 k (≤ 1e5)

    Returns:
        (ks, ratios)
    """
    if not 0 <= k_max <= MAX_CONVOLUTION:
        raise ValueError(f"k_max 需在 0..{MAX_CONVOLUTION} 之间, 实际 {k_max}")
    ks = np.arange(k_max + 1)
    tails = distribution.require_positive(ks)
    pmf = distribution.pmf_array(ks)
    conv_tail = tails + np.convolve(pmf, tails)[:k_max + 1]
    return ks, conv_tail / tails


def subgeometric_probe(distribution: TailDistribution, k_grid: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """log F̄(k)/k 诊断表, 次几何尾应趋于 0"""
    ks = np.asarray(k_grid, dtype=np.int64)
    if np.any(ks <= 0):
        raise ValueError("k_grid 必须为正整数")
    return ks, distribution.log_tail_array(ks) / ks


@dataclass(frozen=True, eq=False)
class CEstimate:
    """c_A、c_B 估计与比值表"""

    c_a: np.ndarray
    c_b: np.ndarray
    grid: np.ndarray
    ratios_a: np.ndarray
    ratios_b: np.ndarray
    residual: float
    shortcut: bool = False
    mismatch: bool = False


def _pareto_limit(model_tail, reference: TailDistribution, rows: int) -> Optional[np.ndarray]:
    """两个 Pareto 族之间 X̿(N)e/F̄(N) 的闭式极限; 不适用时返回 None"""
    if model_tail is None or not isinstance(model_tail.distribution, ParetoTail):
        return None
    if not isinstance(reference, ParetoTail):
        return None
    mt = model_tail.distribution
    expected = mt.alpha - 1.0
    if abs(reference.alpha - expected) <= 1e-12:
        factor = mt.gamma ** mt.alpha / (expected * reference.gamma ** reference.alpha)
        return model_tail.row_scale * factor
    if reference.alpha > expected:
        raise Divergent(
            f"参考分布 {reference.describe()} 比模型尾 {mt.describe()} 衰减更快, 比值发散"
        )
    return np.zeros(rows)


def _ratio_table(double_tail, reference: TailDistribution, grid: np.ndarray) -> np.ndarray:
    f_bar = reference.require_positive(grid)
    table = np.array([double_tail(int(n)).sum(axis=1) for n in grid]) / f_bar[:, None]
    return table


def _relative_change(table: np.ndarray) -> float:
    """网格末两点比值的相对变化, 以两者中较大者为尺度"""
    if table.shape[0] < 2:
        return 0.0
    last, prev = table[-1], table[-2]
    scale = max(float(np.max(np.abs(last))), float(np.max(np.abs(prev))))
    if scale < ZERO_LIMIT:
        return 0.0
    return float(np.max(np.abs(last - prev))) / scale


def estimate_c_vectors(model: MG1Model, reference: TailDistribution, n_grid: Sequence[int]) -> CEstimate:
    """
    c_A = lim A̿(N)e/F̄(N), c_B = lim B̿(N)e/F̄(N)

    两侧都是 Pareto 族时使用闭式极限, 否则取网格末点的比值;
    末两点相对变化超过 C_RESIDUAL_TOL 时该侧记为零并置 mismatch。

    Args:
        model: 模型
        reference: 参考分布 F
        n_grid: 递增的 N 网格

    Returns:
        CEstimate
    """
    grid = np.asarray(n_grid, dtype=np.int64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("n_grid 必须非空、非负且严格递增")

    c_a_exact = _pareto_limit(model.a_tail, reference, model.m1)
    c_b_exact = _pareto_limit(model.b_tail, reference, model.m0)

    ratios_a = _ratio_table(model.double_tail_a, reference, grid)
    ratios_b = _ratio_table(model.double_tail_b, reference, grid)
    if c_a_exact is None and np.max(np.abs(ratios_a)) > DIVERGENCE_LIMIT:
        raise Divergent(f"A̿(N)e/F̄(N) 超过 {DIVERGENCE_LIMIT:g}, 参考分布 {reference.describe()} 不匹配")
    if c_b_exact is None and np.max(np.abs(ratios_b)) > DIVERGENCE_LIMIT:
        raise Divergent(f"B̿(N)e/F̄(N) 超过 {DIVERGENCE_LIMIT:g}, 参考分布 {reference.describe()} 不匹配")

    residual_a = _relative_change(ratios_a)
    residual_b = _relative_change(ratios_b)
    stalled_a = c_a_exact is None and residual_a > C_RESIDUAL_TOL
    stalled_b = c_b_exact is None and residual_b > C_RESIDUAL_TOL
    if stalled_a or stalled_b:
        logger.warning(
            "X̿(N)e/F̄(N) 在网格 %s 上未稳定 (相对变化 A: %.3g, B: %.3g), 参考分布 %s 不匹配",
            grid.tolist(), residual_a, residual_b, reference.describe(),
        )

    if c_a_exact is not None:
        c_a = c_a_exact
    else:
        c_a = np.zeros(model.m1) if stalled_a else ratios_a[-1].copy()
    if c_b_exact is not None:
        c_b = c_b_exact
    else:
        c_b = np.zeros(model.m0) if stalled_b else ratios_b[-1].copy()
    c_a = np.where(np.abs(c_a) < ZERO_LIMIT, 0.0, c_a)
    c_b = np.where(np.abs(c_b) < ZERO_LIMIT, 0.0, c_b)

    residual = max(residual_a if c_a_exact is None else 0.0, residual_b if c_b_exact is None else 0.0)
    return CEstimate(
        c_a=c_a,
        c_b=c_b,
        grid=grid,
        ratios_a=ratios_a,
        ratios_b=ratios_b,
        residual=residual,
        shortcut=c_a_exact is not None or c_b_exact is not None,
        mismatch=stalled_a or stalled_b,
    )


@dataclass(frozen=True, eq=False)
class NLSDistribution:
    """层增量的稳态分布 D 与积分尾分布 D_I"""

    d: np.ndarray
    d_i: np.ndarray
    mean_increment: float

    @property
    def d_i_bar(self) -> np.ndarray:
        return 1.0 - self.d_i


def mean_increment(model: MG1Model, pi0: np.ndarray, pi_bar0: np.ndarray) -> float:
    """π(0)m̄_B + π̄(0)m̄_A⁺"""
    return float(pi0 @ model.m_bar_b() + pi_bar0 @ model.m_bar_a_plus())


def d_i_bar(model: MG1Model, pi0: np.ndarray, pi_bar0: np.ndarray, k: int) -> float:
    """D̄_I(k) = [π(0)B̿(k)e + π̄(0)A̿(k)e] / (π(0)m̄_B + π̄(0)m̄_A⁺)"""
    numerator = pi0 @ model.double_tail_b(k).sum(axis=1) + pi_bar0 @ model.double_tail_a(k).sum(axis=1)
    return float(numerator) / mean_increment(model, pi0, pi_bar0)


def nls_distribution(
    model: MG1Model,
    pi: StationarySolution,
    horizon: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> NLSDistribution:
    """
    D(k) = Σ_{n≤k} [π(0)B(n)e + π̄(0){A(n)e + δ_{n,0}A(−1)e}] 与 D_I

    Args:
        model: 模型
        pi: 平稳分布 (需覆盖足够质量)
        horizon: 表长
        settings: 配置

    Returns:
        NLSDistribution
    """
    if 1.0 - pi.mass > settings.tolerances.eps_mass:
        raise HorizonTooShort(
            f"平稳分布只覆盖质量 {pi.mass:.9f}, 缺失超过 {settings.tolerances.eps_mass:.1e}"
        )
    pi0, pi_bar0 = pi.pi0, pi.pi_bar0
    a_rows = model.a_stack(horizon).sum(axis=2)
    b_rows = np.concatenate([model.b_blocks[0].sum(axis=1)[None, :], model.b_up_stack(horizon).sum(axis=2)])

    increments = b_rows[:horizon + 1] @ pi0 + a_rows[1:horizon + 2] @ pi_bar0
    increments[0] += a_rows[0] @ pi_bar0
    d = np.cumsum(increments)

    denominator = mean_increment(model, pi0, pi_bar0)
    d_i = np.array([1.0 - d_i_bar(model, pi0, pi_bar0, k) for k in range(horizon + 1)])
    return NLSDistribution(d=d, d_i=d_i, mean_increment=denominator)


@dataclass(frozen=True)
class LimitConstants:
    """极限常数"""

    c_a: np.ndarray
    c_b: np.ndarray
    theta: float
    d_i_ratio: float
    theta_di: float
    c_residual: float = 0.0


def limit_constants(
    model: MG1Model,
    reference: TailDistribution,
    pi: StationarySolution,
    n_grid: Sequence[int] = (256, 512, 1024),
) -> LimitConstants:
    """
    θ = (π(0)c_B + π̄(0)c_A)/(−σ), d_i_ratio = (π(0)c_B + π̄(0)c_A)/(π(0)m̄_B + π̄(0)m̄_A⁺),
    theta_di = (π(0)m̄_B + π̄(0)m̄_A⁺)/(−σ)

    Args:
        model: 模型 (σ < 0)
        reference: 参考分布 F
        pi: 平稳分布 (只用 π(0) 与 π̄(0))
        n_grid: c 向量估计网格

    Returns:
        LimitConstants
    """
    estimate = estimate_c_vectors(model, reference, n_grid)
    if estimate.mismatch:
        raise DegenerateLimit(
            f"X̿(N)e/F̄(N) 在网格上未稳定 (相对变化 {estimate.residual:.3g}), 参考分布 {reference.describe()} 不匹配",
            mismatch=True,
        )
    if not (np.any(estimate.c_a > 0) or np.any(estimate.c_b > 0)):
        raise DegenerateLimit(f"c_A 与 c_B 同时为零 (参考分布 {reference.describe()})")
    sigma = model.sigma
    weight = float(pi.pi0 @ estimate.c_b + pi.pi_bar0 @ estimate.c_a)
    denominator = mean_increment(model, pi.pi0, pi.pi_bar0)
    theta = weight / (-sigma)
    if not theta > 0:
        raise DegenerateLimit(f"θ = {theta:.6g} 非正")
    return LimitConstants(
        c_a=estimate.c_a,
        c_b=estimate.c_b,
        theta=theta,
        d_i_ratio=weight / denominator,
        theta_di=denominator / (-sigma),
        c_residual=estimate.residual,
    )


@dataclass(frozen=True)
class SweepRow:
    """收敛扫描的一行 (N, k)"""

    n: int
    k: int
    err_signed: float
    err_l1: float
    ratio_F: float
    ratio_DI: float
    ratio_pitail: float
    rel_tv_ratio: float
    target_theta_pik: float
    target_thetaDI_pik: float
    target_pik: float


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """各 (N, k) 的误差比值与理论目标"""

    grid: Tuple[int, ...]
    k_max: int
    n_ref: int
    rows: Tuple[SweepRow, ...]
    constants: LimitConstants
    reference_ratio: float
    flags: Tuple[str, ...] = field(default_factory=tuple)

    def row(self, n: int, k: int) -> SweepRow:
        for item in self.rows:
            if item.n == n and item.k == k:
                return item
        raise KeyError((n, k))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": list(self.grid),
            "k_max": self.k_max,
            "n_ref": self.n_ref,
            "theta": self.constants.theta,
            "d_i_ratio": self.constants.d_i_ratio,
            "theta_di": self.constants.theta_di,
            "c_a": self.constants.c_a.tolist(),
            "c_b": self.constants.c_b.tolist(),
            "c_residual": self.constants.c_residual,
            "reference_ratio": self.reference_ratio,
            "flags": list(self.flags),
        }


def _safe_ratio(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    if denominator == 0.0:
        return float("nan")
    return numerator / denominator


def convergence_sweep(
    model: MG1Model,
    reference: TailDistribution,
    n_grid: Sequence[int],
    k_max: int,
    n_ref: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> ConvergenceReport:
    """
    在 N 网格上比较 π⁽ᴺ⁾(k) − π(k) 与 F̄(N)、D̄_I(N)、π̄(N)e

    π 取 π⁽ᴺ_ref⁾; 各 N 的求解并行执行, 结果按 (N, k) 排序。

    Args:
        model: 模型
        reference: 参考分布 F
        n_grid: 严格递增的 N 网格
        k_max: 最大层号
        n_ref: 参考截断参数, 需 ≥ 16·max(N)
        settings: 配置

    Returns:
        ConvergenceReport
    """
    grid = tuple(int(n) for n in n_grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ValueError("n_grid 必须为严格递增的正整数序列")
    if n_ref < 16 * grid[-1]:
        raise ValueError(f"n_ref = {n_ref} 小于 16·max(N) = {16 * grid[-1]}")

    horizon = max(grid[-1], k_max)
    ref = pi_truncated(model, n_ref, horizon, settings=settings)
    flags: List[str] = []
    try:
        constants = limit_constants(model, reference, ref, grid)
    except Divergent as exc:
        raise ReferenceMismatch(str(exc)) from exc
    except DegenerateLimit as exc:
        flag = "reference mismatch" if exc.mismatch or model.has_parametric_tail else "degenerate limit"
        logger.warning("%s: %s", flag, exc)
        flags.append(flag)
        constants = LimitConstants(
            c_a=np.zeros(model.m1), c_b=np.zeros(model.m0), theta=0.0, d_i_ratio=0.0,
            theta_di=mean_increment(model, ref.pi0, ref.pi_bar0) / (-model.sigma),
        )

    def solve_one(n: int) -> StationarySolution:
        logger.info("扫描 N=%d", n)
        return pi_truncated(model, n, horizon, settings=settings)

    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        solutions = dict(zip(grid, pool.map(solve_one, grid)))

    rows: List[SweepRow] = []
    for n in grid:
        f_bar = reference.tail(n)
        di_bar = d_i_bar(model, ref.pi0, ref.pi_bar0, n)
        pi_tail = ref.tail_beyond(n)
        pi_n = solutions[n]
        for k in range(k_max + 1):
            pik = ref.pi(k)
            diff = pi_n.pi(k) - pik
            signed = float(diff.sum())
            l1 = float(np.abs(diff).sum())
            mass_k = float(pik.sum())
            rel = l1 / mass_k if mass_k > 0 else 0.0
            rows.append(SweepRow(
                n=n,
                k=k,
                err_signed=signed,
                err_l1=l1,
                ratio_F=_safe_ratio(signed, f_bar),
                ratio_DI=_safe_ratio(signed, di_bar),
                ratio_pitail=_safe_ratio(signed, pi_tail),
                rel_tv_ratio=_safe_ratio(rel, f_bar),
                target_theta_pik=constants.theta * mass_k,
                target_thetaDI_pik=constants.theta_di * mass_k,
                target_pik=mass_k,
            ))

    reference_ratio = reference.tail(n_ref) / reference.tail(grid[-1])
    return ConvergenceReport(
        grid=grid,
        k_max=k_max,
        n_ref=n_ref,
        rows=tuple(rows),
        constants=constants,
        reference_ratio=reference_ratio,
        flags=tuple(flags),
    )
