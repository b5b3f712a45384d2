"""有限状态暴力求解: 平稳分布、H 矩阵、F₊、u(m) 与差分公式校验"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np

from app.chains.linalg import inf_norm, inverse, is_strongly_connected, stationary_vector
from app.chains.model import MG1Model
from app.errors import NotFiniteSupport, NotIrreducible, TruncationBiasTooLarge
from app.settings import DEFAULT_SETTINGS, Settings
from app.solvers.mam import (
    BoundaryResult,
    GMatrixResult,
    boundary_matrices,
    compute_G,
    ramaswami_pi,
)
from app.solvers.truncation import li_truncate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """
    层 0..L 上的有限链, 状态按 (层, 相位) 顺序排列

    Args:
        p: 稠密转移矩阵
        level_cap: 最高层 L
        m0: 第 0 层相位数
        m1: 其余各层相位数
    """

    p: np.ndarray
    level_cap: int
    m0: int
    m1: int

    @classmethod
    def from_matrix(cls, p, m0: Optional[int] = None, m1: int = 1) -> "FiniteChain":
        """由任意随机矩阵构造; 默认全部状态属于第 0 层"""
        p = np.asarray(p, dtype=float)
        n = p.shape[0]
        m0 = n if m0 is None else m0
        if (n - m0) % m1:
            raise ValueError(f"状态数 {n} 无法按 M0={m0}, M1={m1} 分层")
        return cls(p=p, level_cap=(n - m0) // m1, m0=m0, m1=m1)

    @property
    def size(self) -> int:
        return self.p.shape[0]

    def offset(self, level: int) -> int:
        return 0 if level == 0 else self.m0 + (level - 1) * self.m1

    def level_slice(self, level: int) -> slice:
        start = self.offset(level)
        return slice(start, start + (self.m0 if level == 0 else self.m1))

    def state(self, level: int, phase: int) -> int:
        width = self.m0 if level == 0 else self.m1
        if not (0 <= level <= self.level_cap and 0 <= phase < width):
            raise ValueError(f"状态 ({level}, {phase}) 不在层 0..{self.level_cap} 内")
        return self.offset(level) + phase

    def block(self, matrix: np.ndarray, row_level: int, col_level: int) -> np.ndarray:
        """取 matrix 的 (row_level, col_level) 块"""
        return matrix[self.level_slice(row_level), self.level_slice(col_level)]

    def split(self, vector: np.ndarray) -> List[np.ndarray]:
        """行向量按层拆分"""
        return [vector[self.level_slice(level)] for level in range(self.level_cap + 1)]


@dataclass(frozen=True, eq=False)
class OracleBundle:
    """有限链上的全部暴力量"""

    chain: FiniteChain
    pi_fin: np.ndarray
    h_matrix: np.ndarray
    f_plus: np.ndarray
    hitting_times: np.ndarray
    h_residual: float


def build_finite(model: MG1Model, level_cap: int, augment: bool = True) -> FiniteChain:
    """
    把越过 L 的质量并入第 L 层得到有限链

    Args:
        model: 模型
        level_cap: 最高层 L
        augment: 是否并入越界质量

    Returns:
        FiniteChain
    """
    return FiniteChain(p=model.assemble(level_cap, augment=augment), level_cap=level_cap, m0=model.m0, m1=model.m1)


def solve_stationary(chain: FiniteChain, settings: Settings = DEFAULT_SETTINGS) -> np.ndarray:
    """
    稠密直接求解有限链的平稳分布

    Args:
        chain: 有限链
        settings: 配置

    Returns:
        平稳行向量
    """
    if not is_strongly_connected(chain.p):
        raise NotIrreducible(f"层 0..{chain.level_cap} 上的有限链不可约性检查失败")
    pi = stationary_vector(chain.p, "有限链")
    residual = float(np.abs(pi @ chain.p - pi).sum())
    if residual > settings.tolerances.eps_solve * max(1, chain.size):
        logger.warning("有限链平稳方程残差 %.3e 偏大 (状态数 %d)", residual, chain.size)
    return pi


def deviation_H(chain: FiniteChain, pi_fin: np.ndarray, anchor: Tuple[int, int] = (0, 0)) -> np.ndarray:
    """
    H(s; t) = E_s[到达锚点前对 t 的访问次数] − π(t) E_s[T_anchor]

    T_anchor 从 ν = 1 起计, 访问次数从 ν = 0 起计。

    Args:
        chain: 有限链
        pi_fin: 平稳分布
        anchor: 锚点 (层, 相位), 相位从 0 起

    Returns:
        H 矩阵
    """
    a = chain.state(*anchor)
    n = chain.size
    others = np.array([s for s in range(n) if s != a], dtype=np.int64)
    q = chain.p[np.ix_(others, others)]
    fundamental = inverse(np.eye(n - 1) - q, "I − Q (禁忌链)")

    visits = np.zeros((n, n))
    visits[np.ix_(others, others)] = fundamental
    visits[a, a] = 1.0
    visits[a, others] = chain.p[a, others] @ fundamental
    hitting = visits.sum(axis=1)
    return visits - np.outer(hitting, pi_fin)


def h_identity_residual(chain: FiniteChain, pi_fin: np.ndarray, h_matrix: np.ndarray) -> float:
    """max |(I − P)H − (I − eπ)|"""
    n = chain.size
    lhs = h_matrix - chain.p @ h_matrix
    rhs = np.eye(n) - np.outer(np.ones(n), pi_fin)
    return float(np.max(np.abs(lhs - rhs)))


def taboo_F_plus(chain: FiniteChain) -> np.ndarray:
    """
    F₊ = (I − P₊)⁻¹, P₊ 为层 ≥ 1 之间的转移

    Returns:
        以第 1 层为起点编号的方阵
    """
    start = chain.m0
    p_plus = chain.p[start:, start:]
    return inverse(np.eye(p_plus.shape[0]) - p_plus, "I − P₊")


def hitting_times_to_zero(chain: FiniteChain) -> np.ndarray:
    """E[T₀], 起点为层 ≥ 1 的各状态"""
    start = chain.m0
    p_plus = chain.p[start:, start:]
    return np.linalg.solve(np.eye(p_plus.shape[0]) - p_plus, np.ones(p_plus.shape[0]))


def oracle_bundle(
    model: MG1Model,
    level_cap: int,
    anchor: Optional[Tuple[int, int]] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> OracleBundle:
    """在层 0..L 上一次算出 π、H、F₊ 与 E[T₀]"""
    chain = build_finite(model, level_cap)
    pi_fin = solve_stationary(chain, settings)
    h_matrix = deviation_H(chain, pi_fin, anchor if anchor is not None else settings.anchor)
    residual = h_identity_residual(chain, pi_fin, h_matrix)
    if residual > settings.tolerances.eps_check:
        logger.warning("(I − P)H = I − eπ 残差 %.3e 超过 %.1e", residual, settings.tolerances.eps_check)
    return OracleBundle(
        chain=chain,
        pi_fin=pi_fin,
        h_matrix=h_matrix,
        f_plus=taboo_F_plus(chain),
        hitting_times=hitting_times_to_zero(chain),
        h_residual=residual,
    )


def _drift_corrected_inverse(model: MG1Model, g_result: GMatrixResult) -> np.ndarray:
    """(I − A − m̄_A g)⁻¹"""
    m1 = model.m1
    matrix = np.eye(m1) - model.a_total - np.outer(model.m_bar_a(), g_result.g_stat)
    return inverse(matrix, "I − A − m̄_A g")


def u_closed_form(model: MG1Model, g_result: GMatrixResult, m: int) -> np.ndarray:
    """
    u(m) = (I − G^m)(I − A − m̄_A g)⁻¹e + m/(−σ) e

    Args:
        model: 模型 (σ < 0)
        g_result: G 矩阵结果
        m: 层号 m ≥ 1

    Returns:
        E[T₀ | 从第 m 层各相位出发]
    """
    if m < 1:
        raise ValueError(f"u(m) 要求 m ≥ 1, 实际 m={m}")
    m1 = model.m1
    g_m = np.linalg.matrix_power(g_result.g_matrix, m)
    inv = _drift_corrected_inverse(model, g_result)
    return (np.eye(m1) - g_m) @ inv @ np.ones(m1) + m / (-model.sigma) * np.ones(m1)


def verify_u(
    model: MG1Model,
    m: int,
    level_cap: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> Dict[str, Any]:
    """u(m) 闭式与有限链击中时间的比较"""
    g_result = compute_G(model, settings=settings)
    closed = u_closed_form(model, g_result, m)
    chain = build_finite(model, level_cap)
    hitting = hitting_times_to_zero(chain)
    start = chain.offset(m) - chain.m0
    oracle = hitting[start:start + model.m1]
    return {
        "m": m,
        "level_cap": level_cap,
        "u_closed": closed.tolist(),
        "u_oracle": oracle.tolist(),
        "abs_error": float(np.max(np.abs(closed - oracle))),
        "rel_error": float(np.max(np.abs(closed - oracle) / np.abs(oracle))),
    }


def truncation_delta(model: MG1Model, n: int, level_cap: int, window: Optional[int] = None) -> Dict[str, Any]:
    """
    P⁽ᴺ⁾ − P 在层窗口上的非零块位置, 并与理论五类模式比较

    Args:
        model: 有限支撑模型
        n: 截断参数 N
        level_cap: 组装层数上限 (不做增广)
        window: 检查的行层数上限, 默认 level_cap − N − 1

    Returns:
        {"observed", "expected", "match", "value_error"}
    """
    if model.has_parametric_tail:
        raise NotFiniteSupport("Δ⁽ᴺ⁾ 结构检查只接受有限支撑模型")
    truncated = li_truncate(model, n).model
    window = level_cap - n - 1 if window is None else window
    chain = build_finite(model, level_cap, augment=False)
    delta = truncated.assemble(level_cap, augment=False) - chain.p

    observed: Set[Tuple[int, int]] = set()
    expected: Dict[Tuple[int, int], np.ndarray] = {}
    for row in range(window + 1):
        for col in range(level_cap + 1):
            if np.any(np.abs(chain.block(delta, row, col)) > 0.0):
                observed.add((row, col))
        if row == 0:
            candidates = [(n, model.tail_b(n))] + [(c, -model.block_b(c)) for c in range(n + 1, level_cap + 1)]
        else:
            candidates = [(n + row, model.tail_a(n))] + [
                (c, -model.block_a(c - row)) for c in range(n + row + 1, level_cap + 1)
            ]
        for col, block in candidates:
            if col <= level_cap and np.any(block != 0.0):
                expected[(row, col)] = block

    value_error = 0.0
    for (row, col), block in expected.items():
        value_error = max(value_error, float(np.max(np.abs(chain.block(delta, row, col) - block))))
    return {
        "observed": sorted(observed),
        "expected": sorted(expected),
        "match": observed == set(expected),
        "value_error": value_error,
    }


@dataclass(frozen=True, eq=False)
class _ExactParts:
    """无限链的精确量: G、Φ(0)、σ、g、m̄_A 及 Ramaswami 的 π"""

    g_result: GMatrixResult
    boundary: BoundaryResult
    sigma: float
    drift_inverse: np.ndarray
    pi_levels: List[np.ndarray] = field(default_factory=list)


def _exact_parts(model: MG1Model, levels: int, settings: Settings) -> _ExactParts:
    solution = ramaswami_pi(model, levels, settings=settings)
    g_result = solution.g_result
    return _ExactParts(
        g_result=g_result,
        boundary=solution.boundary,
        sigma=model.sigma,
        drift_inverse=_drift_corrected_inverse(model, g_result),
        pi_levels=solution.pi_blocks,
    )


def _s_matrix(model: MG1Model, exact: _ExactParts, h00k: np.ndarray, pi_k: np.ndarray) -> np.ndarray:
    """S(k) = (I−Φ(0))⁻¹B(−1)H(0;k) + G(I − A − m̄_A g)⁻¹e π(k)"""
    g = exact.g_result.g_matrix
    first = exact.boundary.inv_i_phi @ model.b_down @ h00k
    second = np.outer(g @ exact.drift_inverse @ np.ones(model.m1), pi_k)
    return first + second


def _horner(vectors: List[np.ndarray], g: np.ndarray) -> np.ndarray:
    """Σ_{i} vectors[i] G^i"""
    acc = np.zeros_like(vectors[-1]) if vectors else np.zeros(g.shape[0])
    for vec in reversed(vectors):
        acc = acc @ g + vec
    return acc


def _tail_weighted(blocks: np.ndarray, n: int, g: np.ndarray, tail_n: np.ndarray) -> np.ndarray:
    """
    D = X̄(N) − Σ_{j>N} X(j) G^{j−N}

    Args:
        blocks: X(N+1), X(N+2), …
        n: 截断参数 N
        g: G 矩阵
        tail_n: X̄(N)
    """
    acc = np.zeros_like(tail_n)
    for block in blocks[::-1]:
        acc = acc @ g + block
    # acc = Σ_{j>N} X(j) G^{j−N−1}
    return tail_n - acc @ g


def verify_difference_formula(
    model: MG1Model,
    n: int,
    k: int,
    level_cap: int,
    anchor: Optional[Tuple[int, int]] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> Dict[str, Any]:
    """
    逐层差分公式校验: π⁽ᴺ⁾(k) − π(k) 的两侧比较, 附带逐层上界

    左侧两项都取自有限链求解; 右侧用精确的 G、Φ(0)、σ、g、m̄_A 与
    有限链上的 π⁽ᴺ⁾、π(k)、F₊(k;k)、H(0;k)。k = 0 时不含 F₊ 项。

    Args:
        model: 有限支撑模型
        n: 截断参数 N
        k: 层号, 0 ≤ k ≤ N
        level_cap: 有限链最高层 L
        anchor: H 的锚点, 默认取配置
        settings: 配置

    Returns:
        残差报告字典
    """
    if model.has_parametric_tail:
        raise NotFiniteSupport("差分公式校验只接受有限支撑模型, 请先做有限截断")
    if not 0 <= k <= n:
        raise ValueError(f"要求 0 ≤ k ≤ N, 实际 k={k}, N={n}")
    if level_cap <= n + model.support_levels:
        raise ValueError(f"有限链层数 L={level_cap} 过小, 需大于 N + max(K_A, K_B)")
    anchor = anchor if anchor is not None else settings.anchor

    exact = _exact_parts(model, n, settings)
    bundle = oracle_bundle(model, level_cap, anchor, settings)
    chain = bundle.chain
    pi_levels = chain.split(bundle.pi_fin)
    bias = max(float(np.max(np.abs(pi_levels[j] - exact.pi_levels[j]))) for j in range(n + 1))
    if bias > settings.bias_tol:
        raise TruncationBiasTooLarge(
            f"有限链 L={level_cap} 与 Ramaswami 解在层 0..{n} 上相差 {bias:.3e} > {settings.bias_tol:.1e}"
        )

    truncated = li_truncate(model, n).model
    pin_levels = chain.split(solve_stationary(build_finite(truncated, level_cap), settings))
    lhs = pin_levels[k] - pi_levels[k]

    g = exact.g_result.g_matrix
    sigma = exact.sigma
    pi_k = pi_levels[k]
    h00k = chain.block(bundle.h_matrix, 0, k)
    s_k = _s_matrix(model, exact, h00k, pi_k)
    f_kk = None
    if k >= 1:
        rows = slice(chain.offset(k) - chain.m0, chain.offset(k) - chain.m0 + model.m1)
        f_kk = bundle.f_plus[rows, rows]

    support = model.support_levels
    d_b = _tail_weighted(model.b_up_stack(support)[n:], n, g, model.tail_b(n))
    d_a = _tail_weighted(model.a_stack(support)[n + 2:], n, g, model.tail_a(n))
    g_pow = np.linalg.matrix_power

    rhs = pin_levels[0] @ model.double_tail_b(n - 1).sum(axis=1) / (-sigma) * pi_k
    rhs = rhs + sum(pin_levels[1:]) @ model.double_tail_a(n - 1).sum(axis=1) / (-sigma) * pi_k
    # Σ_ℓ π⁽ᴺ⁾(ℓ) D_A G^{ℓ−1}
    a_side = _horner([p @ d_a for p in pin_levels[1:]], g)
    b_side = pin_levels[0] @ d_b
    if f_kk is not None:
        rhs = rhs + b_side @ g_pow(g, n - k) @ f_kk
        rhs = rhs + a_side @ g_pow(g, n + 1 - k) @ f_kk
    rhs = rhs + b_side @ g_pow(g, n - 1) @ s_k
    rhs = rhs + a_side @ g_pow(g, n) @ s_k
    residual = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0

    # 逐层上界: e^T[X̿(N−1)e π(k)/(−σ) + 2 X̄(N)e e^T(F₊(k;k) + |S(k)|)], X = A, B
    scalar_mean = (model.double_tail_b(n - 1).sum() + model.double_tail_a(n - 1).sum()) / (-sigma)
    scalar_tail = model.tail_b(n).sum() + model.tail_a(n).sum()
    spread = np.abs(s_k).sum(axis=0)
    if f_kk is not None:
        spread = spread + f_kk.sum(axis=0)
    bound = scalar_mean * pi_k + 2.0 * scalar_tail * spread

    report = {
        "n": n,
        "k": k,
        "level_cap": level_cap,
        "anchor": list(anchor),
        "lhs": lhs.tolist(),
        "rhs": rhs.tolist(),
        "residual": residual,
        "bias": bias,
        "h_residual": bundle.h_residual,
        "lhs_l1": float(np.abs(lhs).sum()),
        "bound_l1": float(bound.sum()),
        "within_bound": bool(np.all(np.abs(lhs) <= bound + settings.tolerances.eps_check)),
    }
    logger.debug("差分公式 N=%d k=%d L=%d: 残差 %.3e, 偏差 %.3e", n, k, level_cap, residual, bias)
    return report


def verify_h_blocks(
    model: MG1Model,
    m: int,
    k: int,
    level_cap: int,
    anchor: Optional[Tuple[int, int]] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> Dict[str, Any]:
    """
    H(m;k) 与 G^{m−k}F₊(k;k) + G^{m−1}(I−Φ(0))⁻¹B(−1)H(0;k) − u(m)π(k) 的比较

    Args:
        model: 有限支撑模型
        m: 行层号, m > k
        k: 列层号 (k = 0 时不含 F₊ 项)
        level_cap: 有限链最高层
        anchor: H 的锚点
        settings: 配置

    Returns:
        {"m", "k", "residual"}
    """
    if model.has_parametric_tail:
        raise NotFiniteSupport("H 块分解校验只接受有限支撑模型")
    if not 0 <= k < m < level_cap:
        raise ValueError(f"要求 0 ≤ k < m < L, 实际 k={k}, m={m}, L={level_cap}")
    exact = _exact_parts(model, max(k, 1), settings)
    bundle = oracle_bundle(model, level_cap, anchor, settings)
    chain = bundle.chain
    g = exact.g_result.g_matrix
    pi_k = chain.split(bundle.pi_fin)[k]

    predicted = (
        np.linalg.matrix_power(g, m - 1) @ exact.boundary.inv_i_phi @ model.b_down @ chain.block(bundle.h_matrix, 0, k)
        - np.outer(u_closed_form(model, exact.g_result, m), pi_k)
    )
    if k >= 1:
        rows = slice(chain.offset(k) - chain.m0, chain.offset(k) - chain.m0 + model.m1)
        predicted = predicted + np.linalg.matrix_power(g, m - k) @ bundle.f_plus[rows, rows]
    observed = chain.block(bundle.h_matrix, m, k)
    return {"m": m, "k": k, "level_cap": level_cap, "residual": inf_norm(observed - predicted)}
