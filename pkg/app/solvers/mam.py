"""矩阵解析核心: G 矩阵、Φ(0)、K、κ、R(k)、R₀(k) 与 Ramaswami 递推"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from app.chains.linalg import (
    inf_norm,
    inverse,
    matrix_powers,
    solve_left,
    spectral_radius,
    stationary_vector,
)
from app.chains.model import MG1Model
from app.errors import DriftNonNegative, HorizonTooShort, NotConverged, SingularMatrix
from app.settings import DEFAULT_SETTINGS, Settings

logger = logging.getLogger(__name__)

# Φ(0) 谱半径超过 1 − PHI_MARGIN 即视为奇异
PHI_MARGIN = 1e-10


@dataclass(frozen=True, eq=False)
class GMatrixResult:
    """G 矩阵迭代结果"""

    g_matrix: np.ndarray
    g_stat: np.ndarray
    iterations: int
    residual: float
    min_increment: float

    @property
    def row_sum_defect(self) -> float:
        """‖Ge − e‖∞"""
        return inf_norm(self.g_matrix.sum(axis=1) - 1.0)


@dataclass(frozen=True, eq=False)
class BoundaryResult:
    """边界矩阵 Φ(0)、K 与 κ"""

    phi0: np.ndarray
    k_matrix: np.ndarray
    kappa: np.ndarray
    inv_i_phi: np.ndarray


@dataclass(frozen=True, eq=False)
class StationarySolution:
    """
    π(0), π(1), …, π(K_h) 及诊断量

    pi0 长度为 M0, pi_levels 为 (K_h, M1) 数组, 第 i 行为 π(i+1)。
    """

    pi0: np.ndarray
    pi_levels: np.ndarray
    pi_bar0: np.ndarray
    residual: float
    g_result: Optional[GMatrixResult] = field(default=None, repr=False)
    boundary: Optional[BoundaryResult] = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return int(self.pi_levels.shape[0])

    @property
    def pi_blocks(self) -> List[np.ndarray]:
        return [self.pi0] + [row for row in self.pi_levels]

    def pi(self, k: int) -> np.ndarray:
        """π(k)"""
        if k < 0 or k > self.horizon:
            raise HorizonTooShort(f"请求第 {k} 层, 但解只覆盖 0..{self.horizon}")
        return self.pi0 if k == 0 else self.pi_levels[k - 1]

    @property
    def level_mass(self) -> np.ndarray:
        """π(k)e, k = 0..K_h"""
        return np.concatenate([[self.pi0.sum()], self.pi_levels.sum(axis=1)])

    @property
    def mass(self) -> float:
        return float(self.level_mass.sum())

    @property
    def total_mass(self) -> float:
        """π(0)e + π̄(0)e"""
        return float(self.pi0.sum() + self.pi_bar0.sum())

    @property
    def tail_mass_bound(self) -> float:
        return max(0.0, self.total_mass - self.mass)

    def tail_beyond(self, k: int) -> float:
        """
        π̄(k)e = Σ_{ℓ>k} π(ℓ)e

        Args:
            k: 层号, 0 ≤ k ≤ K_h

        Returns:
            非负尾质量
        """
        if k < 0 or k > self.horizon:
            raise HorizonTooShort(f"请求 π̄({k}), 但解只覆盖 0..{self.horizon}")
        return max(0.0, 1.0 - float(self.level_mass[:k + 1].sum()))


def _check_drift(model: MG1Model, allow_nonnegative_drift: bool) -> float:
    sigma = model.sigma
    if not sigma < 0 and not allow_nonnegative_drift:
        raise DriftNonNegative(f"模型 {model.name or '<unnamed>'} 的漂移 σ = {sigma:.6g} ≥ 0")
    return sigma


def compute_G(
    model: MG1Model,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    allow_nonnegative_drift: bool = False,
    settings: Settings = DEFAULT_SETTINGS,
) -> GMatrixResult:
    """
    自然迭代 G_n = Σ_{m≥0} A(m−1) G_{n−1}^m, G_0 = O

    Args:
        model: 模型
        tol: 相邻迭代 ∞-范数差的收敛阈值
        max_iter: 最大迭代次数
        allow_nonnegative_drift: 为 True 时允许 σ ≥ 0 (G 可为次随机)
        settings: 配置

    Returns:
        GMatrixResult
    """
    tol = settings.solver.g_tol if tol is None else tol
    max_iter = settings.solver.g_max_iter if max_iter is None else max_iter
    _check_drift(model, allow_nonnegative_drift)

    cutoff = model.series_cutoff
    stack = model.a_stack(cutoff)
    count = stack.shape[0]
    m1 = model.m1
    powers = np.empty((count, m1, m1))

    g = np.zeros((m1, m1))
    min_increment = np.inf
    for iteration in range(1, max_iter + 1):
        matrix_powers(g, count, out=powers)
        g_new = np.einsum("kij,kjl->il", stack, powers)
        delta = g_new - g
        min_increment = min(min_increment, float(delta.min()))
        g = g_new
        if inf_norm(delta) < tol:
            break
    else:
        raise NotConverged(max_iter, f"G 矩阵迭代 {max_iter} 次后仍未收敛 (差 {inf_norm(delta):.3e})")

    matrix_powers(g, count, out=powers)
    residual = inf_norm(g - np.einsum("kij,kjl->il", stack, powers))
    logger.debug("G 迭代 %d 次收敛, 残差 %.3e, 截断 K=%d", iteration, residual, cutoff)
    result = GMatrixResult(
        g_matrix=g,
        g_stat=stationary_vector(g, "G"),
        iterations=iteration,
        residual=residual,
        min_increment=min_increment,
    )
    # σ < 0 时 G 应为随机矩阵
    if model.sigma < 0 and result.row_sum_defect > settings.tolerances.eps_g:
        logger.warning("G 的行和偏离 1 达 %.3e (容差 %.1e)", result.row_sum_defect, settings.tolerances.eps_g)
    return result


def _backward_sums(blocks: np.ndarray, g: np.ndarray, keep: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Y(i) = Σ_{m≥0} blocks[i+m] G^m, 由 Y(i) = blocks[i] + Y(i+1) G 倒推

    Args:
        blocks: (n, r, c) 块序列
        g: G 矩阵
        keep: 保留 Y(0..keep−1)

    Returns:
        (Y(0..keep−1), Σ_i Y(i))
    """
    n = blocks.shape[0]
    rows, cols = blocks.shape[1], blocks.shape[2]
    kept = np.zeros((keep, rows, cols))
    total = np.zeros((rows, cols))
    y = np.zeros((rows, cols))
    for i in range(n - 1, -1, -1):
        y = blocks[i] + y @ g
        total += y
        if i < keep:
            kept[i] = y
    return kept, total


def boundary_matrices(model: MG1Model, g_result: GMatrixResult) -> BoundaryResult:
    """
    Φ(0) = Σ_{m≥0} A(m)G^m, K = B(0) + Σ_{m≥1} B(m)G^{m−1}(I−Φ(0))⁻¹B(−1), κK = κ

    Args:
        model: 模型
        g_result: compute_G 的结果

    Returns:
        BoundaryResult
    """
    g = g_result.g_matrix
    cutoff = model.series_cutoff
    phi_stack, _ = _backward_sums(model.a_stack(cutoff)[1:], g, 1)
    phi0 = phi_stack[0]
    radius = spectral_radius(phi0)
    if radius >= 1.0 - PHI_MARGIN:
        raise SingularMatrix(f"Φ(0) 的谱半径 {radius:.12g} ≥ 1, I − Φ(0) 不可逆")
    inv_i_phi = inverse(np.eye(model.m1) - phi0, "I − Φ(0)")

    y0_stack, _ = _backward_sums(model.b_up_stack(cutoff), g, 1)
    k_matrix = model.b_blocks[0] + y0_stack[0] @ inv_i_phi @ model.b_down
    kappa = stationary_vector(k_matrix, "K")
    return BoundaryResult(phi0=phi0, k_matrix=k_matrix, kappa=kappa, inv_i_phi=inv_i_phi)


def r_matrices(
    model: MG1Model,
    g_result: GMatrixResult,
    boundary: BoundaryResult,
    k_max: int,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    R(k) = Σ_{m≥0} A(k+m)G^m(I−Φ(0))⁻¹, R₀(k) = Σ_{m≥0} B(k+m)G^m(I−Φ(0))⁻¹

    Args:
        model: 模型
        g_result: G 矩阵结果
        boundary: 边界矩阵结果
        k_max: 最大 k

    Returns:
        [(R(k), R₀(k)) for k = 1..k_max]
    """
    r, r0, _, _ = _r_stacks(model, g_result.g_matrix, boundary.inv_i_phi, k_max)
    return [(r[k], r0[k]) for k in range(1, k_max + 1)]


def _r_stacks(
    model: MG1Model,
    g: np.ndarray,
    inv_i_phi: np.ndarray,
    k_max: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """R(0..k_max), R₀(0..k_max) (下标 0 位置为零) 以及 Y(1), Y₀(1)"""
    cutoff = max(model.series_cutoff, 1)
    m0, m1 = model.m0, model.m1
    # A(1..K) 对应 Y(1..), B(1..K) 对应 Y₀(1..)
    y_a, _ = _backward_sums(model.a_stack(cutoff)[2:], g, max(k_max, 1))
    y_b, _ = _backward_sums(model.b_up_stack(cutoff), g, max(k_max, 1))
    r = np.zeros((k_max + 1, m1, m1))
    r0 = np.zeros((k_max + 1, m0, m1))
    r[1:] = y_a[:k_max] @ inv_i_phi
    r0[1:] = y_b[:k_max] @ inv_i_phi
    return r, r0, y_a[0], y_b[0]


def pi_zero(
    model: MG1Model,
    g_result: GMatrixResult,
    boundary: BoundaryResult,
) -> np.ndarray:
    """
    π(0) = κ / [1 + κ{m̄_B + (Σ_{m≥1}B(m)(I−G^m))(I − A + eϖ)⁻¹m̄_A}/(−σ)]

    Args:
        model: 模型 (σ < 0)
        g_result: G 矩阵结果
        boundary: 边界矩阵结果

    Returns:
        π(0)
    """
    sigma = _check_drift(model, False)
    g = g_result.g_matrix
    cutoff = model.series_cutoff
    y0_stack, _ = _backward_sums(model.b_up_stack(cutoff), g, 1)
    # Σ_{m≥1} B(m)(I − G^m) = B̄(0) − Y₀(1) G
    correction = model.tail_b(0) - y0_stack[0] @ g
    fundamental = np.eye(model.m1) - model.a_total + np.outer(np.ones(model.m1), model.varpi)
    try:
        z = np.linalg.solve(fundamental, model.m_bar_a())
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"I − A + eϖ 奇异: {exc}") from exc
    kappa = boundary.kappa
    denominator = 1.0 + float(kappa @ (model.m_bar_b() + correction @ z)) / (-sigma)
    if not (np.isfinite(denominator) and denominator > 0):
        raise SingularMatrix(f"π(0) 的归一化因子非正: {denominator}")
    return kappa / denominator


def _spot_check(model: MG1Model, pi0: np.ndarray, pis: np.ndarray, levels: int) -> float:
    """max_j ‖(πP)(j) − π(j)‖₁, j = 0..levels"""
    if levels < 0 or pis.shape[0] == 0:
        return 0.0
    a = model.a_stack(levels)
    b_up = model.b_up_stack(levels)
    worst = float(np.abs(pi0 @ model.b_blocks[0] + pis[0] @ model.b_down - pi0).sum())
    for j in range(1, levels + 1):
        # Σ_{ℓ=1}^{j+1} π(ℓ)A(j−ℓ), a[i] = A(i−1)
        flow = pi0 @ b_up[j - 1] + np.einsum("li,lim->m", pis[:j + 1], a[j::-1])
        worst = max(worst, float(np.abs(flow - pis[j - 1]).sum()))
    return worst


def ramaswami_pi(
    model: MG1Model,
    horizon: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> StationarySolution:
    """
    Ramaswami 递推: π(k) = π(0)R₀(k) + Σ_{ℓ=1}^{k−1} π(ℓ)R(k−ℓ)

    Args:
        model: 模型 (σ < 0)
        horizon: 最高层 K_h ≥ 0
        settings: 配置

    Returns:
        StationarySolution
    """
    if horizon < 0:
        raise ValueError(f"horizon 必须 ≥ 0, 实际 {horizon}")
    g_result = compute_G(model, settings=settings)
    boundary = boundary_matrices(model, g_result)
    pi0 = pi_zero(model, g_result, boundary)

    r, r0, _, _ = _r_stacks(model, g_result.g_matrix, boundary.inv_i_phi, max(horizon, 1))
    pis = np.zeros((horizon, model.m1))
    for k in range(1, horizon + 1):
        value = pi0 @ r0[k]
        if k > 1:
            value = value + np.einsum("lj,ljm->m", pis[:k - 1], r[k - 1:0:-1])
        pis[k - 1] = value

    pi1 = pi0 @ r0[1]
    source = pi0 @ model.tail_b(0) - pi1 @ model.a_blocks[0] + (1.0 - pi0.sum()) * model.varpi
    fundamental = np.eye(model.m1) - model.a_total + np.outer(np.ones(model.m1), model.varpi)
    pi_bar0 = solve_left(source, fundamental, "I − A + eϖ")

    levels = min(horizon - 1, settings.solver.spot_check_levels)
    residual = _spot_check(model, pi0, pis, levels)
    if residual > settings.tolerances.eps_check:
        logger.warning("πP = π 抽查残差 %.3e 超过 %.1e (层 0..%d)", residual, settings.tolerances.eps_check, levels)

    solution = StationarySolution(
        pi0=pi0,
        pi_levels=pis,
        pi_bar0=pi_bar0,
        residual=residual,
        g_result=g_result,
        boundary=boundary,
    )
    logger.debug(
        "Ramaswami 递推完成: K_h=%d, 质量 %.15f, 尾界 %.3e", horizon, solution.mass, solution.tail_mass_bound
    )
    return solution
