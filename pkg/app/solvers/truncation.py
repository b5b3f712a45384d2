"""LI 截断算子与截断误差度量"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from app.chains.model import MG1Model
from app.errors import DriftNonNegative, HorizonTooShort
from app.settings import DEFAULT_SETTINGS, Settings
from app.solvers.mam import StationarySolution, ramaswami_pi

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TruncatedModel:
    """截断参数为 n 的 LI 截断模型"""

    base: MG1Model
    n: int
    model: MG1Model

    @property
    def is_identity(self) -> bool:
        return self.model is self.base


def li_truncate(model: MG1Model, n: int) -> TruncatedModel:
    """
    A⁽ᴺ⁾(k) = A(k) (k < N), A⁽ᴺ⁾(N) = Ā(N−1), 其余为零; B 同理

    Args:
        model: 原模型
        n: 截断参数 N ≥ 1

    Returns:
        TruncatedModel; 若原模型支撑已不超过 N 则直接返回原模型
    """
    if n < 1:
        raise ValueError(f"截断参数 N 必须 ≥ 1, 实际 {n}")
    if not model.has_parametric_tail and model.k_a <= n and model.k_b <= n:
        return TruncatedModel(base=model, n=n, model=model)

    a_blocks = tuple(model.a_stack(n - 1)) + (model.tail_a(n - 1),)
    b_blocks = (model.b_blocks[0],) + tuple(model.b_up_stack(n - 1)) + (model.tail_b(n - 1),)
    truncated = replace(
        model,
        a_blocks=a_blocks,
        b_blocks=b_blocks,
        a_tail=None,
        b_tail=None,
        name=f"{model.name}@N={n}" if model.name else f"N={n}",
    )
    logger.debug("LI 截断 %s: N=%d", model.name or "<unnamed>", n)
    return TruncatedModel(base=model, n=n, model=truncated)


def truncated_drift(model: MG1Model, n: int) -> float:
    """
    σ⁽ᴺ⁾ = σ − ϖ A̿(N−1) e

    A 的总和在截断下不变, 只有均值移动。
    """
    if n < 1:
        raise ValueError(f"截断参数 N 必须 ≥ 1, 实际 {n}")
    return float(model.sigma - model.varpi @ model.double_tail_a(n - 1).sum(axis=1))


def pi_truncated(
    model: MG1Model,
    n: int,
    horizon: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> StationarySolution:
    """
    截断模型的平稳分布 π⁽ᴺ⁾

    Args:
        model: 原模型
        n: 截断参数 N
        horizon: 最高层 K_h
        settings: 配置

    Returns:
        StationarySolution
    """
    truncated = li_truncate(model, n)
    sigma_n = truncated.model.sigma
    if not sigma_n < 0:
        raise DriftNonNegative(f"截断模型 N={n} 的漂移 σ⁽ᴺ⁾ = {sigma_n:.6g} ≥ 0")
    return ramaswami_pi(truncated.model, horizon, settings=settings)


@dataclass(frozen=True, eq=False)
class ErrorMetrics:
    """π⁽ᴺ⁾ 与 π 的逐层误差"""

    level_errors: np.ndarray
    signed_level_diff: np.ndarray
    relative_tv: np.ndarray
    tv_total: float

    @property
    def k_max(self) -> int:
        return int(self.level_errors.size - 1)


def error_metrics(
    pi_ref: StationarySolution,
    pi_n: StationarySolution,
    k_max: int,
) -> ErrorMetrics:
    """
    逐层 ℓ1 误差、带符号质量差与相对全变差

    Args:
        pi_ref: 参考分布
        pi_n: 截断近似
        k_max: 最大层号

    Returns:
        ErrorMetrics; tv_total 额外计入两个解在 k_max 之外的尾质量
    """
    for label, solution in (("参考解", pi_ref), ("截断解", pi_n)):
        if solution.horizon < k_max:
            raise HorizonTooShort(f"{label}只覆盖 0..{solution.horizon}, 需要 0..{k_max}")

    level_errors = np.empty(k_max + 1)
    signed = np.empty(k_max + 1)
    relative = np.empty(k_max + 1)
    for k in range(k_max + 1):
        diff = pi_n.pi(k) - pi_ref.pi(k)
        level_errors[k] = np.abs(diff).sum()
        signed[k] = diff.sum()
        weight = pi_ref.pi(k).sum()
        if weight > 0:
            relative[k] = level_errors[k] / weight
        else:
            relative[k] = 0.0 if level_errors[k] == 0 else np.inf

    tv_total = float(level_errors.sum() + pi_ref.tail_beyond(k_max) + pi_n.tail_beyond(k_max))
    return ErrorMetrics(
        level_errors=level_errors,
        signed_level_diff=signed,
        relative_tv=relative,
        tv_total=min(max(tv_total, 0.0), 2.0),
    )
