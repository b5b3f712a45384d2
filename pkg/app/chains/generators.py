"""测试模型生成器与预置模型

随机结构使用 numpy 的 default_rng (PCG64 算法), 同一种子得到逐位相同的模型。
"""
import logging
from dataclasses import replace
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from app.chains.model import MG1Model, ParametricTail
from app.chains.tails import GeometricTail, ParetoTail, TailDistribution, WeibullTail
from app.errors import CannotReachDrift, InvalidModel, MassMismatch

logger = logging.getLogger(__name__)

MASS_TOL = 1e-10
DRIFT_TOL = 1e-7
MAX_PHASES = 50


def scalar_tail(distribution: TailDistribution, scale: float) -> ParametricTail:
    """1×1 参数尾"""
    return ParametricTail(distribution, np.array([scale]), np.array([1.0]))


def make_scalar(
    down: float,
    body: Sequence[float],
    tail: Optional[ParametricTail] = None,
    boundary: Sequence[float] = (0.5, 0.5),
    name: str = "",
) -> MG1Model:
    """
    构造 M0 = M1 = 1 的标量模型

    Args:
        down: A(−1), 同时作为 B(−1)
        body: A(0), A(1), …
        tail: A(k) 在 body 之后的参数尾
        boundary: B(0), B(1), …
        name: 模型名称

    Returns:
        MG1Model
    """
    k_a = len(body) - 1
    tail_mass = 0.0
    if tail is not None:
        tail_mass = float(tail.row_scale[0]) * tail.distribution.tail(k_a)
    total = down + float(np.sum(body)) + tail_mass
    if abs(total - 1.0) > MASS_TOL:
        raise MassMismatch(f"A 的质量之和为 {total:.12g}, 应为 1")
    if len(boundary) < 1:
        raise MassMismatch("boundary 至少需要 B(0)")
    if abs(float(np.sum(boundary)) - 1.0) > MASS_TOL:
        raise MassMismatch(f"B 的质量之和为 {float(np.sum(boundary)):.12g}, 应为 1")
    return MG1Model(
        m0=1,
        m1=1,
        a_blocks=([[down]],) + tuple([[v]] for v in body),
        b_down=[[down]],
        b_blocks=tuple([[v]] for v in boundary),
        a_tail=tail,
        name=name,
    )


def _random_stochastic(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.dirichlet(np.ones(cols), size=rows)


def make_phased(
    m0: int,
    m1: int,
    seed: int,
    tail_family: Optional[TailDistribution],
    drift_target: float,
    rank_one: bool = True,
    body_support: int = 2,
    tail_fraction: float = 0.3,
    name: str = "",
) -> MG1Model:
    """
    构造可复现的多相位模型

    A(k) = (1−w)·Down(k) + w·Up(k): Down 只有 A(−1) (可选秩一),
    Up 为 A(0..body_support) 上的随机随机矩阵序列加参数尾;
    对 w 做二分使 σ 达到目标。

    Args:
        m0: 边界层相位数
        m1: 非边界层相位数
        seed: 随机种子
        tail_family: 参数尾分布, None 表示有限支撑
        drift_target: 目标漂移 σ < 0
        rank_one: A(−1) 是否取秩一 e ⊗ β
        body_support: Up 序列的最大显式层增量
        tail_fraction: Up 每行分给参数尾的平均质量
        name: 模型名称

    Returns:
        校验无缺陷的 MG1Model
    """
    if not (1 <= m0 <= MAX_PHASES and 1 <= m1 <= MAX_PHASES):
        raise InvalidModel(f"相位数需在 1..{MAX_PHASES} 之间, 实际 M0={m0}, M1={m1}")
    if not drift_target < 0:
        raise CannotReachDrift(f"目标漂移必须为负, 实际 {drift_target}")

    rng = np.random.default_rng(seed)
    if rank_one:
        down = np.outer(np.ones(m1), rng.dirichlet(np.ones(m1)))
    else:
        down = _random_stochastic(rng, m1, m1)

    n_body = body_support + 1
    if tail_family is not None:
        tail_mass = rng.uniform(0.5, 1.5, size=m1) * tail_fraction
        tail_mass = np.clip(tail_mass, 0.0, 0.95)
    else:
        tail_mass = np.zeros(m1)
    body = _random_stochastic(rng, m1, n_body * m1) * (1.0 - tail_mass)[:, None]
    up = body.reshape(m1, n_body, m1).transpose(1, 0, 2)
    col_profile = rng.dirichlet(np.ones(m1))

    beta0 = rng.dirichlet(np.ones(m0))
    b0 = _random_stochastic(rng, m0, m0) * 0.5
    b1 = _random_stochastic(rng, m0, m1) * 0.5

    def build(w: float) -> MG1Model:
        a_tail = None
        if tail_family is not None:
            row_scale = w * tail_mass / tail_family.tail(body_support)
            a_tail = ParametricTail(tail_family, row_scale, col_profile)
        a_blocks = ((1.0 - w) * down,) + tuple(w * up[k] for k in range(n_body))
        return MG1Model(
            m0=m0,
            m1=m1,
            a_blocks=a_blocks,
            b_down=(1.0 - w) * np.outer(np.ones(m1), beta0),
            b_blocks=(b0, b1),
            a_tail=a_tail,
            name=name,
        )

    sigma_hi = build(1.0).sigma
    if not -1.0 < drift_target < sigma_hi:
        raise CannotReachDrift(f"目标漂移 {drift_target} 不在可达区间 (−1, {sigma_hi:.6g}) 内")

    lo, hi = 0.0, 1.0
    model = build(0.5)
    for _ in range(200):
        w = 0.5 * (lo + hi)
        model = build(w)
        sigma = model.sigma
        if abs(sigma - drift_target) < DRIFT_TOL:
            break
        if sigma < drift_target:
            lo = w
        else:
            hi = w
    else:
        raise CannotReachDrift(f"二分 200 次后 σ={model.sigma:.10g} 仍未达到 {drift_target}")

    report = model.validate()
    if not report.ok:
        raise InvalidModel(
            "生成的模型未通过校验: " + ", ".join(v.name for v in report.violations)
        )
    logger.debug("make_phased seed=%d: w=%.10f, σ=%.10f", seed, w, model.sigma)
    return model


def scalar_1() -> MG1Model:
    """A(−1)=0.6, A(0)=0.2, A(1)=0.2; B(0)=B(1)=0.5"""
    return make_scalar(0.6, [0.2, 0.2], name="scalar-1")


def pareto_1() -> MG1Model:
    """A(−1)=0.7, 其余 0.3 质量为 Pareto(3, 1) 尾"""
    return make_scalar(0.7, [], scalar_tail(ParetoTail(3.0, 1.0), 0.3), name="pareto-1")


def pareto_2() -> MG1Model:
    """与 pareto-1 同结构, α = 2"""
    return make_scalar(0.7, [], scalar_tail(ParetoTail(2.0, 1.0), 0.3), name="pareto-2")


def weibull_1() -> MG1Model:
    """A(−1)=0.7, 0.3 质量为 Weibull(1, 0.5) 尾"""
    return make_scalar(0.7, [], scalar_tail(WeibullTail(1.0, 0.5), 0.3), name="weibull-1")


def geometric_1() -> MG1Model:
    """A(−1)=0.7, 0.3 质量为几何(0.5) 尾; 轻尾对照"""
    return make_scalar(0.7, [], scalar_tail(GeometricTail(0.5), 0.3), name="geometric-1")


def pareto_cut12() -> MG1Model:
    """pareto-1 在 K = 12 处做 LI 截断后的有限支撑模型"""
    from app.solvers.truncation import li_truncate

    return replace(li_truncate(pareto_1(), 12).model, name="pareto-cut12")


PRESETS: Dict[str, Callable[[], MG1Model]] = {
    "scalar-1": scalar_1,
    "pareto-1": pareto_1,
    "pareto-2": pareto_2,
    "weibull-1": weibull_1,
    "geometric-1": geometric_1,
    "pareto-cut12": pareto_cut12,
}


def preset(name: str) -> MG1Model:
    """
    按名称取预置模型

    Args:
        name: PRESETS 中的键 (大小写不敏感)

    Returns:
        MG1Model
    """
    key = name.strip().lower()
    if key not in PRESETS:
        raise KeyError(f"未知的预置模型 {name!r}, 可选: {', '.join(PRESETS)}")
    return PRESETS[key]()
