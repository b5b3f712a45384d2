"""尾分布族: Pareto / Weibull / 几何 / 经验分布

约定: 支撑为非负整数, F̄(k) = P(X > k), 且 k < 0 时 F̄(k) = 1。
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy import special

from app.errors import InvalidTail, SeriesNotConvergent

logger = logging.getLogger(__name__)

# 逐项求和时每块的初始长度
_CHUNK = 4096


class TailDistribution(ABC):
    """整数支撑的尾分布基类"""

    family: str = "none"

    @abstractmethod
    def _tail_nonneg(self, ks: np.ndarray) -> np.ndarray:
        """k ≥ 0 时的 F̄(k)"""

    @abstractmethod
    def _pmf_nonneg(self, ks: np.ndarray) -> np.ndarray:
        """k ≥ 0 时的 P(X = k), 需避免相减抵消"""

    @abstractmethod
    def _sum_from(self, m: int, eps: float, cap: int) -> float:
        """Σ_{ℓ≥m} F̄(ℓ), m ≥ 0"""

    @property
    @abstractmethod
    def params(self) -> Tuple[float, ...]:
        """族参数"""

    def tail_array(self, ks) -> np.ndarray:
        """向量化的 F̄(k)"""
        ks = np.asarray(ks, dtype=np.int64)
        out = np.ones(ks.shape, dtype=float)
        mask = ks >= 0
        if np.any(mask):
            out[mask] = self._tail_nonneg(ks[mask])
        return out

    def pmf_array(self, ks) -> np.ndarray:
        """向量化的 p(k) = F̄(k−1) − F̄(k)"""
        ks = np.asarray(ks, dtype=np.int64)
        out = np.zeros(ks.shape, dtype=float)
        mask = ks >= 0
        if np.any(mask):
            out[mask] = self._pmf_nonneg(ks[mask])
        return out

    def tail(self, k: int) -> float:
        """
        尾概率 F̄(k)

        Args:
            k: 整数, k ≥ −1 (更小的 k 也返回 1)

        Returns:
            P(X > k)
        """
        return float(self.tail_array([k])[0])

    def pmf(self, k: int) -> float:
        """概率质量 P(X = k)"""
        return float(self.pmf_array([k])[0])

    def tail_sum(self, j: int, eps: float = 1e-12, cap: int = 10_000_000) -> float:
        """
        Σ_{ℓ>j} F̄(ℓ)

        Args:
            j: 起点 (不含), 可为负
            eps: 截断余项容差
            cap: 逐项求和的项数上限

        Returns:
            级数值
        """
        start = j + 1
        negative_terms = max(0, -start)
        return float(negative_terms) + self._sum_from(max(start, 0), eps, cap)

    def mean(self, eps: float = 1e-12, cap: int = 10_000_000) -> float:
        """E[X] = Σ_{ℓ≥0} F̄(ℓ)"""
        return self.tail_sum(-1, eps, cap)

    def tail_quantile(self, eps: float, cap: int = 10_000_000) -> int:
        """
        最小的 k ≥ 0 使得 F̄(k) ≤ eps

        Args:
            eps: 目标尾概率
            cap: 搜索上限

        Returns:
            分位点 k
        """
        if self.tail(0) <= eps:
            return 0
        hi = 1
        while self.tail(hi) > eps:
            hi *= 2
            if hi > cap:
                raise SeriesNotConvergent(
                    f"{self.describe()} 的尾概率在 {cap} 项内未降到 {eps:.1e} 以下"
                )
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail(mid) > eps:
                lo = mid
            else:
                hi = mid
        return hi

    def log_tail_array(self, ks) -> np.ndarray:
        """log F̄(k), 用于次几何性诊断"""
        with np.errstate(divide="ignore"):
            return np.log(self.tail_array(ks))

    def require_positive(self, ks) -> np.ndarray:
        """返回 F̄(ks), 若存在零值则报错"""
        values = self.tail_array(ks)
        if np.any(values <= 0.0):
            bad = int(np.asarray(ks)[np.argmax(values <= 0.0)])
            raise InvalidTail(f"{self.describe()} 在 k={bad} 处 F̄(k)=0, 不满足正尾条件")
        return values

    def describe(self) -> str:
        """与 parse 互逆的文本形式, 如 'pareto:3,1'"""
        return f"{self.family}:" + ",".join(f"{p:g}" for p in self.params)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "params": [float(p) for p in self.params]}

    @staticmethod
    def parse(text: str) -> "TailDistribution":
        """
        解析 'family:p1,p2' 形式的文本

        Args:
            text: 如 'pareto:2,1', 'weibull:1,0.5', 'geometric:0.5'

        Returns:
            对应的尾分布
        """
        name, _, rest = text.strip().partition(":")
        try:
            values = [float(v) for v in rest.split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidTail(f"无法解析尾分布参数: {text!r}") from exc
        return make_tail(name.strip().lower(), values)

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "TailDistribution":
        return make_tail(str(data.get("family", "")).lower(), list(data.get("params", [])))


@dataclass(frozen=True)
class ParetoTail(TailDistribution):
    """F̄(k) = (γ/(k+γ))^α"""

    alpha: float
    gamma: float = 1.0
    family: str = field(default="pareto", init=False)

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.gamma > 0):
            raise InvalidTail(f"Pareto 参数需满足 α>0, γ>0, 实际 α={self.alpha}, γ={self.gamma}")

    @property
    def params(self) -> Tuple[float, ...]:
        return (self.alpha, self.gamma)

    def _tail_nonneg(self, ks: np.ndarray) -> np.ndarray:
        return np.exp(-self.alpha * np.log1p(ks / self.gamma))

    def _pmf_nonneg(self, ks: np.ndarray) -> np.ndarray:
        out = np.zeros(ks.shape, dtype=float)
        pos = ks >= 1
        k = ks[pos].astype(float)
        prev = np.exp(-self.alpha * np.log1p((k - 1.0) / self.gamma))
        # F̄(k)/F̄(k−1) = (1 − 1/(k+γ))^α
        out[pos] = -prev * np.expm1(self.alpha * np.log1p(-1.0 / (k + self.gamma)))
        return out

    def _sum_from(self, m: int, eps: float, cap: int) -> float:
        if self.alpha <= 1.0:
            raise SeriesNotConvergent(f"Pareto α={self.alpha} ≤ 1, Σ F̄(k) 发散")
        return float(self.gamma ** self.alpha * special.zeta(self.alpha, m + self.gamma))

    def log_tail_array(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=float)
        return np.where(ks < 0, 0.0, -self.alpha * np.log1p(np.maximum(ks, 0.0) / self.gamma))


@dataclass(frozen=True)
class WeibullTail(TailDistribution):
    """F̄(k) = exp(−λ k^α), 0 < α < 1"""

    lam: float
    alpha: float
    family: str = field(default="weibull", init=False)

    def __post_init__(self) -> None:
        if not (self.lam > 0 and 0 < self.alpha < 1):
            raise InvalidTail(f"Weibull 参数需满足 λ>0, 0<α<1, 实际 λ={self.lam}, α={self.alpha}")

    @property
    def params(self) -> Tuple[float, ...]:
        return (self.lam, self.alpha)

    def _tail_nonneg(self, ks: np.ndarray) -> np.ndarray:
        return np.exp(-self.lam * np.power(ks.astype(float), self.alpha))

    def _pmf_nonneg(self, ks: np.ndarray) -> np.ndarray:
        out = np.zeros(ks.shape, dtype=float)
        pos = ks >= 1
        k = ks[pos].astype(float)
        prev_exp = np.power(k - 1.0, self.alpha)
        step = np.power(k, self.alpha) - prev_exp
        out[pos] = -np.exp(-self.lam * prev_exp) * np.expm1(-self.lam * step)
        return out

    def _integral_from(self, y: float) -> float:
        """∫_y^∞ exp(−λ x^α) dx"""
        s = 1.0 / self.alpha
        return float(
            s * self.lam ** (-s) * special.gamma(s) * special.gammaincc(s, self.lam * y ** self.alpha)
        )

    def _sum_from(self, m: int, eps: float, cap: int) -> float:
        total = 0.0
        start = m
        chunk = _CHUNK
        while True:
            ks = np.arange(start, start + chunk, dtype=np.int64)
            total += math.fsum(self._tail_nonneg(ks))
            start += chunk
            # 单调递减: Σ_{ℓ≥L} F̄(ℓ) ≤ ∫_{L−1}^∞
            remainder = self._integral_from(start - 1)
            if remainder < eps:
                logger.debug("Weibull 部分和 m=%d 截断于 %d 项, 余项 %.2e", m, start - m, remainder)
                return total
            if start - m >= cap:
                raise SeriesNotConvergent(
                    f"{self.describe()} 的部分和在 {cap} 项后余项仍为 {remainder:.2e}"
                )
            chunk = min(chunk * 2, cap - (start - m))


@dataclass(frozen=True)
class GeometricTail(TailDistribution):
    """F̄(k) = ρ^{k+1}"""

    rho: float
    family: str = field(default="geometric", init=False)

    def __post_init__(self) -> None:
        if not (0 < self.rho < 1):
            raise InvalidTail(f"几何分布参数需满足 0<ρ<1, 实际 ρ={self.rho}")

    @property
    def params(self) -> Tuple[float, ...]:
        return (self.rho,)

    def _tail_nonneg(self, ks: np.ndarray) -> np.ndarray:
        return np.power(self.rho, ks.astype(float) + 1.0)

    def _pmf_nonneg(self, ks: np.ndarray) -> np.ndarray:
        return np.power(self.rho, ks.astype(float)) * (1.0 - self.rho)

    def _sum_from(self, m: int, eps: float, cap: int) -> float:
        return self.rho ** (m + 1) / (1.0 - self.rho)


@dataclass(frozen=True, eq=False)
class EmpiricalTail(TailDistribution):
    """由概率质量表 p(0), p(1), … 给出的有限支撑分布"""

    table: Tuple[float, ...]
    family: str = field(default="empirical", init=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.table, dtype=float)
        if values.size == 0 or np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidTail("经验分布的概率表必须非空、非负且有限")
        if abs(values.sum() - 1.0) > 1e-10:
            raise InvalidTail(f"经验分布概率之和为 {values.sum():.12g}, 应为 1")
        object.__setattr__(self, "table", tuple(float(v) for v in values))
        # 尾概率表 F̄(0..n−1); 更大的 k 为 0
        tails = np.clip(1.0 - np.cumsum(values), 0.0, 1.0)
        object.__setattr__(self, "_tails", tails)

    @property
    def params(self) -> Tuple[float, ...]:
        return self.table

    def _tail_nonneg(self, ks: np.ndarray) -> np.ndarray:
        tails = self._tails
        out = np.zeros(ks.shape, dtype=float)
        inside = ks < tails.size
        out[inside] = tails[ks[inside]]
        return out

    def _pmf_nonneg(self, ks: np.ndarray) -> np.ndarray:
        table = np.asarray(self.table)
        out = np.zeros(ks.shape, dtype=float)
        inside = ks < table.size
        out[inside] = table[ks[inside]]
        return out

    def _sum_from(self, m: int, eps: float, cap: int) -> float:
        return float(np.sum(self._tails[m:]))


def make_tail(family: str, values: Sequence[float]) -> TailDistribution:
    """
    按族名与参数列表构造尾分布

    Args:
        family: pareto / weibull / geometric / empirical
        values: 参数列表

    Returns:
        尾分布对象
    """
    expected = {"pareto": (1, 2), "weibull": (2, 2), "geometric": (1, 1)}
    if family in expected:
        lo, hi = expected[family]
        if not lo <= len(values) <= hi:
            raise InvalidTail(f"{family} 需要 {lo}~{hi} 个参数, 实际 {len(values)} 个")
    if family == "pareto":
        return ParetoTail(float(values[0]), float(values[1]) if len(values) > 1 else 1.0)
    if family == "weibull":
        return WeibullTail(float(values[0]), float(values[1]))
    if family == "geometric":
        return GeometricTail(float(values[0]))
    if family == "empirical":
        return EmpiricalTail(tuple(float(v) for v in values))
    raise InvalidTail(f"未知的尾分布族: {family!r}")
