"""M/G/1 型转移结构: 块序列、尾矩阵与模型校验"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.chains.linalg import (
    as_block,
    inf_norm,
    is_strongly_connected,
    stationary_vector,
)
from app.chains.tails import TailDistribution
from app.errors import DimensionMismatch, InvalidModel, InvalidTail, SeriesNotConvergent, SingularMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ParametricTail:
    """
    秩一参数尾: block(k) = row_scale ⊗ col_profile · p_F(k)

    仅作用于显式块之后的 k。
    """

    distribution: TailDistribution
    row_scale: np.ndarray
    col_profile: np.ndarray

    def __post_init__(self) -> None:
        scale = np.array(self.row_scale, dtype=float).reshape(-1)
        profile = np.array(self.col_profile, dtype=float).reshape(-1)
        if np.any(scale < 0) or not np.all(np.isfinite(scale)):
            raise InvalidTail("row_scale 必须非负且有限")
        if np.any(profile < 0) or abs(profile.sum() - 1.0) > 1e-10:
            raise InvalidTail(f"col_profile 必须为概率向量, 当前和为 {profile.sum():.12g}")
        scale.setflags(write=False)
        profile.setflags(write=False)
        object.__setattr__(self, "row_scale", scale)
        object.__setattr__(self, "col_profile", profile)

    @cached_property
    def matrix(self) -> np.ndarray:
        """row_scale ⊗ col_profile"""
        return np.outer(self.row_scale, self.col_profile)

    @property
    def max_scale(self) -> float:
        return float(self.row_scale.max()) if self.row_scale.size else 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = self.distribution.to_dict()
        data["row_scale"] = self.row_scale.tolist()
        data["col_profile"] = self.col_profile.tolist()
        return data


class _BlockSequence:
    """
    从 first 开始的显式块 + 可选参数尾

    block(k) 对 first ≤ k ≤ last 取显式值, k > last 时取参数尾。
    """

    def __init__(
        self,
        first: int,
        blocks: Sequence[np.ndarray],
        tail: Optional[ParametricTail],
        shape: Tuple[int, int],
        eps_tail: float,
        series_cap: int,
    ) -> None:
        self.first = first
        self.shape = shape
        self.explicit = (
            np.stack(blocks) if len(blocks) else np.zeros((0,) + shape)
        )
        self.last = first + len(blocks) - 1
        self.tail = tail
        self.eps_tail = eps_tail
        self.series_cap = series_cap
        # suffix[i] = Σ_{j ≥ first+i} 显式块
        if len(blocks):
            self.suffix = np.cumsum(self.explicit[::-1], axis=0)[::-1]
        else:
            self.suffix = np.zeros((0,) + shape)
        self._tail_sum_cache: Dict[int, float] = {}

    @property
    def has_tail(self) -> bool:
        return self.tail is not None and self.tail.max_scale > 0.0

    def _tail_matrix(self) -> np.ndarray:
        return self.tail.matrix if self.tail is not None else np.zeros(self.shape)

    def _f_bar(self, k: int) -> float:
        return self.tail.distribution.tail(k) if self.has_tail else 0.0

    def _f_sum(self, j: int) -> float:
        """Σ_{ℓ>j} F̄(ℓ)"""
        if not self.has_tail:
            return 0.0
        if j not in self._tail_sum_cache:
            self._tail_sum_cache[j] = self.tail.distribution.tail_sum(j, self.eps_tail, self.series_cap)
        return self._tail_sum_cache[j]

    def block(self, k: int) -> np.ndarray:
        if self.first <= k <= self.last:
            return self.explicit[k - self.first].copy()
        if k > self.last and self.has_tail:
            return self._tail_matrix() * self.tail.distribution.pmf(k)
        return np.zeros(self.shape)

    def block_stack(self, lo: int, hi: int) -> np.ndarray:
        """block(lo..hi), 形状 (hi−lo+1, r, c)"""
        count = max(0, hi - lo + 1)
        out = np.zeros((count,) + self.shape)
        if count == 0:
            return out
        e_lo, e_hi = max(lo, self.first), min(hi, self.last)
        if e_lo <= e_hi:
            out[e_lo - lo:e_hi - lo + 1] = self.explicit[e_lo - self.first:e_hi - self.first + 1]
        t_lo = max(lo, self.last + 1)
        if self.has_tail and t_lo <= hi:
            pmf = self.tail.distribution.pmf_array(np.arange(t_lo, hi + 1))
            out[t_lo - lo:] = pmf[:, None, None] * self._tail_matrix()
        return out

    def tail_sum(self, k: int) -> np.ndarray:
        """Σ_{ℓ>k} block(ℓ), k ≥ first−1"""
        out = self._tail_matrix() * self._f_bar(max(k, self.last))
        idx = k + 1 - self.first
        if idx < len(self.suffix):
            out = out + self.suffix[max(idx, 0)]
        return out

    def tail_stack(self, lo: int, hi: int) -> np.ndarray:
        """tail_sum(lo..hi) 的批量形式"""
        count = max(0, hi - lo + 1)
        out = np.zeros((count,) + self.shape)
        if count == 0:
            return out
        ks = np.arange(lo, hi + 1)
        if self.has_tail:
            f_bar = self.tail.distribution.tail_array(np.maximum(ks, self.last))
            out += f_bar[:, None, None] * self._tail_matrix()
        idx = ks + 1 - self.first
        inside = idx < len(self.suffix)
        if np.any(inside):
            out[inside] += self.suffix[np.maximum(idx[inside], 0)]
        return out

    def double_tail_sum(self, k: int) -> np.ndarray:
        """Σ_{ℓ>k} tail_sum(ℓ), k ≥ first−2"""
        js = np.arange(self.first, self.last + 1)
        weights = np.maximum(0, js - k - 1).astype(float)
        out = np.tensordot(weights, self.explicit, axes=1) if len(js) else np.zeros(self.shape)
        if self.has_tail:
            count = max(0, self.last - k - 1)
            scalar = count * self._f_bar(self.last) + self._f_sum(max(k + 1, self.last) - 1)
            out = out + self._tail_matrix() * scalar
        return out

    def cutoff(self) -> int:
        """最小的 k ≥ last 使各行剩余尾质量 ≤ eps_tail"""
        if not self.has_tail:
            return max(self.last, self.first - 1)
        target = self.eps_tail / self.tail.max_scale
        k = self.tail.distribution.tail_quantile(target, self.series_cap)
        return max(self.last, k)


@dataclass(frozen=True, eq=False)
class MG1Model:
    """
    M/G/1 型马尔可夫链的块结构

    Args:
        m0: 边界层相位数 M0
        m1: 非边界层相位数 M1
        a_blocks: A(−1), A(0), …, A(K_A)
        b_down: B(−1), M1×M0
        b_blocks: B(0), B(1), …, B(K_B); B(0) 为 M0×M0
        a_tail: A(k), k > K_A 的参数尾
        b_tail: B(k), k > K_B 的参数尾
        name: 模型名称
        eps_tail: 尾级数截断容差
        series_cap: 级数项数上限
    """

    m0: int
    m1: int
    a_blocks: Tuple[np.ndarray, ...]
    b_down: np.ndarray
    b_blocks: Tuple[np.ndarray, ...]
    a_tail: Optional[ParametricTail] = None
    b_tail: Optional[ParametricTail] = None
    name: str = ""
    eps_tail: float = field(default=1e-12, repr=False)
    series_cap: int = field(default=10_000_000, repr=False)

    def __post_init__(self) -> None:
        if int(self.m0) < 1 or int(self.m1) < 1:
            raise InvalidModel(f"相位数必须为正整数, 实际 M0={self.m0}, M1={self.m1}")
        m0, m1 = int(self.m0), int(self.m1)
        if len(self.a_blocks) < 1:
            raise DimensionMismatch("a_blocks 至少需要包含 A(−1)")
        if len(self.b_blocks) < 1:
            raise DimensionMismatch("b_blocks 至少需要包含 B(0)")
        a_blocks = tuple(
            as_block(b, m1, m1, f"A({k - 1})") for k, b in enumerate(self.a_blocks)
        )
        b_down = as_block(self.b_down, m1, m0, "B(−1)")
        b_blocks = (as_block(self.b_blocks[0], m0, m0, "B(0)"),) + tuple(
            as_block(b, m0, m1, f"B({k})") for k, b in enumerate(self.b_blocks[1:], start=1)
        )
        for label, tail, rows, cols in (("a_tail", self.a_tail, m1, m1), ("b_tail", self.b_tail, m0, m1)):
            if tail is not None and (tail.row_scale.size != rows or tail.col_profile.size != cols):
                raise DimensionMismatch(
                    f"{label} 尺寸为 ({tail.row_scale.size}, {tail.col_profile.size}), 期望 ({rows}, {cols})"
                )
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "a_blocks", a_blocks)
        object.__setattr__(self, "b_down", b_down)
        object.__setattr__(self, "b_blocks", b_blocks)

    # ---- 序列视图 ----

    @cached_property
    def _a_seq(self) -> _BlockSequence:
        return _BlockSequence(-1, self.a_blocks, self.a_tail, (self.m1, self.m1), self.eps_tail, self.series_cap)

    @cached_property
    def _b_seq(self) -> _BlockSequence:
        return _BlockSequence(1, self.b_blocks[1:], self.b_tail, (self.m0, self.m1), self.eps_tail, self.series_cap)

    @property
    def k_a(self) -> int:
        """显式 A 块的最大下标 K_A"""
        return len(self.a_blocks) - 2

    @property
    def k_b(self) -> int:
        """显式 B 块的最大下标 K_B"""
        return len(self.b_blocks) - 1

    @property
    def has_parametric_tail(self) -> bool:
        return self._a_seq.has_tail or self._b_seq.has_tail

    @property
    def is_finite_support(self) -> bool:
        return not self.has_parametric_tail

    @property
    def support_levels(self) -> int:
        """max(K_A, K_B)"""
        return max(self.k_a, self.k_b)

    # ---- 块与尾 ----

    def block_a(self, k: int) -> np.ndarray:
        """
        A(k)

        Args:
            k: 层增量, k ≥ −1

        Returns:
            M1×M1 矩阵
        """
        if k < -1:
            raise ValueError(f"A(k) 要求 k ≥ −1, 实际 k={k}")
        return self._a_seq.block(k)

    def block_b(self, k: int) -> np.ndarray:
        """B(k): k=−1 为 M1×M0, k=0 为 M0×M0, k≥1 为 M0×M1"""
        if k < -1:
            raise ValueError(f"B(k) 要求 k ≥ −1, 实际 k={k}")
        if k == -1:
            return self.b_down.copy()
        if k == 0:
            return self.b_blocks[0].copy()
        return self._b_seq.block(k)

    def tail_a(self, k: int) -> np.ndarray:
        """Ā(k) = Σ_{ℓ>k} A(ℓ), k ≥ −2"""
        if k < -2:
            raise ValueError(f"Ā(k) 要求 k ≥ −2, 实际 k={k}")
        return self._a_seq.tail_sum(k)

    def tail_b(self, k: int) -> np.ndarray:
        """B̄(k) = Σ_{ℓ>k} B(ℓ), k ≥ 0"""
        if k < 0:
            raise ValueError(f"B̄(k) 要求 k ≥ 0, 实际 k={k}")
        return self._b_seq.tail_sum(k)

    def double_tail_a(self, k: int) -> np.ndarray:
        """A̿(k) = Σ_{ℓ>k} Ā(ℓ), k ≥ −3"""
        if k < -3:
            raise ValueError(f"A̿(k) 要求 k ≥ −3, 实际 k={k}")
        return self._a_seq.double_tail_sum(k)

    def double_tail_b(self, k: int) -> np.ndarray:
        """B̿(k) = Σ_{ℓ>k} B̄(ℓ), k ≥ −1"""
        if k < -1:
            raise ValueError(f"B̿(k) 要求 k ≥ −1, 实际 k={k}")
        return self._b_seq.double_tail_sum(k)

    def a_stack(self, hi: int) -> np.ndarray:
        """A(−1..hi), 第 j 个元素为 A(j−1)"""
        return self._a_seq.block_stack(-1, hi)

    def b_up_stack(self, hi: int) -> np.ndarray:
        """B(1..hi), 第 j 个元素为 B(j+1)"""
        return self._b_seq.block_stack(1, hi)

    def tail_a_stack(self, lo: int, hi: int) -> np.ndarray:
        """Ā(lo..hi)"""
        return self._a_seq.tail_stack(lo, hi)

    @cached_property
    def a_total(self) -> np.ndarray:
        """A = Σ_{k≥−1} A(k)"""
        return self.tail_a(-2)

    @cached_property
    def series_cutoff(self) -> int:
        """级数截断点: 剩余各行尾质量 ≤ eps_tail 的最小层增量"""
        cutoff = max(self._a_seq.cutoff(), self._b_seq.cutoff(), 0)
        logger.debug("模型 %s 的级数截断点 K=%d", self.name or "<unnamed>", cutoff)
        return cutoff

    # ---- 矩 ----

    def m_bar_a(self) -> np.ndarray:
        """m̄_A = Σ k A(k) e"""
        return self.double_tail_a(-1).sum(axis=1) - self.a_blocks[0].sum(axis=1)

    def m_bar_a_plus(self) -> np.ndarray:
        """m̄_A⁺ = Σ_{k≥1} k A(k) e"""
        return self.double_tail_a(-1).sum(axis=1)

    def m_bar_b(self) -> np.ndarray:
        """m̄_B = Σ_{k≥1} k B(k) e"""
        return self.double_tail_b(-1).sum(axis=1)

    @cached_property
    def varpi(self) -> np.ndarray:
        """A 的平稳向量 ϖ"""
        return stationary_vector(self.a_total, "A")

    @cached_property
    def sigma(self) -> float:
        """平均漂移 σ = ϖ m̄_A"""
        return float(self.varpi @ self.m_bar_a())

    # ---- 有限链组装 ----

    def level_offset(self, level: int) -> int:
        """第 level 层第一个状态的下标"""
        return 0 if level == 0 else self.m0 + (level - 1) * self.m1

    def n_states(self, level_cap: int) -> int:
        return self.m0 + level_cap * self.m1

    def assemble(self, level_cap: int, augment: bool = True) -> np.ndarray:
        """
        组装层 0..L 上的稠密转移矩阵

        Args:
            level_cap: 最高层 L ≥ 1
            augment: 为 True 时把越过 L 的质量并入第 L 层 (按 Ā/B̄ 的列分布);
                     为 False 时直接丢弃, 行和可小于 1

        Returns:
            (M0 + L·M1) 阶方阵
        """
        L = int(level_cap)
        if L < 1:
            raise ValueError(f"层数上限必须 ≥ 1, 实际 {L}")
        m0, m1 = self.m0, self.m1
        size = self.n_states(L)
        p = np.zeros((size, size))

        # 行块 A(0..L−1) 横向拼接
        a_up = self.a_stack(L - 1)[1:]
        a_row = a_up.transpose(1, 0, 2).reshape(m1, L * m1)
        a_lumped = self.tail_a_stack(-1, L - 2) if augment else None

        b_up = self.b_up_stack(L)
        p[:m0, :m0] = self.b_blocks[0]
        p[:m0, m0:] = b_up[:L].transpose(1, 0, 2).reshape(m0, L * m1)
        if augment:
            p[:m0, self.level_offset(L):] = self.tail_b(L - 1)

        for level in range(1, L + 1):
            rows = slice(self.level_offset(level), self.level_offset(level) + m1)
            if level == 1:
                p[rows, :m0] = self.b_down
            else:
                down = self.level_offset(level - 1)
                p[rows, down:down + m1] = self.a_blocks[0]
            span = L - level + 1
            start = self.level_offset(level)
            p[rows, start:] = a_row[:, :span * m1]
            if augment:
                # Σ_{k ≥ L−level} A(k) = Ā(L−level−1)
                p[rows, self.level_offset(L):] = a_lumped[L - level]
        return p

    def validate(self, eps_stoch: float = 1e-10, eps_solve: float = 1e-12) -> "ValidationReport":
        """等价于 validate(self, ...)"""
        return validate(self, eps_stoch=eps_stoch, eps_solve=eps_solve)


@dataclass(frozen=True)
class Violation:
    """一条校验缺陷"""

    name: str
    magnitude: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "magnitude": self.magnitude, "detail": self.detail}


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """模型校验结果, 仅作诊断"""

    irreducible_P: bool
    irreducible_A: bool
    sigma: float
    m_bar_A: np.ndarray
    m_bar_B: np.ndarray
    m_bar_A_plus: np.ndarray
    varpi: np.ndarray
    violations: Tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def has(self, name: str) -> bool:
        return any(v.name == name for v in self.violations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "irreducible_P": self.irreducible_P,
            "irreducible_A": self.irreducible_A,
            "sigma": self.sigma,
            "m_bar_A": self.m_bar_A.tolist(),
            "m_bar_B": self.m_bar_B.tolist(),
            "m_bar_A_plus": self.m_bar_A_plus.tolist(),
            "varpi": self.varpi.tolist(),
            "violations": [v.to_dict() for v in self.violations],
        }


def validate(model: MG1Model, eps_stoch: float = 1e-10, eps_solve: float = 1e-12) -> ValidationReport:
    """
    校验模型的行和、不可约性与负漂移条件

    Args:
        model: 待校验模型
        eps_stoch: 行和容差
        eps_solve: 平稳方程残差容差

    Returns:
        ValidationReport; σ ≥ 0 等问题记入 violations 而不抛异常
    """
    violations: List[Violation] = []
    m0, m1 = model.m0, model.m1
    nan_m1 = np.full(m1, np.nan)

    row_checks = (
        ("boundary row sum", lambda: model.b_blocks[0].sum(axis=1) + model.tail_b(0).sum(axis=1)),
        ("level-1 row sum", lambda: model.b_down.sum(axis=1) + model.tail_a(-1).sum(axis=1)),
        ("level row sum", lambda: model.a_total.sum(axis=1)),
    )
    for name, rows in row_checks:
        deviation = float(np.max(np.abs(rows() - 1.0)))
        if deviation > eps_stoch:
            violations.append(Violation(name, deviation, "行和偏离 1"))

    if not np.any(model.a_blocks[0] > 0):
        violations.append(Violation("zero A(-1)", 0.0, "A(−1) 全为零, 链无法下降"))

    irreducible_A = is_strongly_connected(model.a_total)
    if not irreducible_A:
        violations.append(Violation("reducible A", 1.0, "A 的支撑图不强连通"))
    l_irr = model.support_levels + 2
    irreducible_P = is_strongly_connected(model.assemble(l_irr, augment=True))
    if not irreducible_P:
        violations.append(Violation("reducible P", 1.0, f"层 0..{l_irr} 上的支撑图不强连通"))

    try:
        varpi = model.varpi
        residual = float(np.abs(varpi @ model.a_total - varpi).sum())
        if residual > eps_solve:
            violations.append(Violation("varpi residual", residual, "‖ϖA − ϖ‖₁ 超出容差"))
    except SingularMatrix as exc:
        varpi = np.full(m1, np.nan)
        violations.append(Violation("singular A", np.inf, str(exc)))

    try:
        m_bar_a = model.m_bar_a()
        m_bar_a_plus = model.m_bar_a_plus()
        m_bar_b = model.m_bar_b()
        sigma = float(varpi @ m_bar_a)
    except SeriesNotConvergent as exc:
        m_bar_a, m_bar_a_plus, m_bar_b = nan_m1, nan_m1, np.full(m0, np.nan)
        sigma = float("inf")
        violations.append(Violation("infinite mean", np.inf, str(exc)))

    if not sigma < 0:
        violations.append(Violation("positive drift", sigma, f"σ = {sigma:.6g} ≥ 0"))

    report = ValidationReport(
        irreducible_P=irreducible_P,
        irreducible_A=irreducible_A,
        sigma=sigma,
        m_bar_A=m_bar_a,
        m_bar_B=m_bar_b,
        m_bar_A_plus=m_bar_a_plus,
        varpi=varpi,
        violations=tuple(violations),
    )
    if violations:
        logger.info("模型 %s 校验发现 %d 项问题: %s", model.name or "<unnamed>", len(violations),
                    ", ".join(v.name for v in violations))
    return report


def row_sum_defect(model: MG1Model) -> float:
    """三类行和的最大偏差"""
    return max(
        inf_norm(model.b_blocks[0].sum(axis=1) + model.tail_b(0).sum(axis=1) - 1.0),
        inf_norm(model.b_down.sum(axis=1) + model.tail_a(-1).sum(axis=1) - 1.0),
        inf_norm(model.a_total.sum(axis=1) - 1.0),
    )
