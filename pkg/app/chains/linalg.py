"""稠密线性代数辅助函数"""
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from app.errors import DimensionMismatch, InvalidModel, SingularMatrix

# 块矩阵即二维非负 float64 数组; 行/列角色由所在位置决定
BlockMatrix = np.ndarray


def as_block(
    data,
    rows: int,
    cols: int,
    name: str = "block",
) -> BlockMatrix:
    """
    转换并校验一个块矩阵

    Args:
        data: 嵌套列表或数组
        rows: 期望行数
        cols: 期望列数
        name: 报错时使用的名称

    Returns:
        只读的 (rows, cols) float64 数组
    """
    block = np.array(data, dtype=float)
    if block.ndim == 1 and rows == 1:
        block = block.reshape(1, -1)
    if block.shape != (rows, cols):
        raise DimensionMismatch(f"{name} 尺寸为 {block.shape}, 期望 ({rows}, {cols})")
    if not np.all(np.isfinite(block)):
        raise InvalidModel(f"{name} 含有非有限元素")
    if np.any(block < 0):
        raise InvalidModel(f"{name} 含有负元素 (最小值 {block.min():.3e})")
    block.setflags(write=False)
    return block


def inf_norm(x: np.ndarray) -> float:
    """∞-范数 (最大行和)"""
    if x.size == 0:
        return 0.0
    if x.ndim == 1:
        return float(np.max(np.abs(x)))
    return float(np.max(np.sum(np.abs(x), axis=-1)))


def stationary_vector(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    直接求解随机矩阵的平稳概率向量

    将 (M^T - I) 的最后一行替换为归一化条件后做稠密求解。

    Args:
        matrix: (n, n) 随机矩阵 (仅一个常返类)
        name: 报错时使用的名称

    Returns:
        满足 x M = x, x e = 1 的行向量
    """
    n = matrix.shape[0]
    if n == 1:
        return np.ones(1)
    system = matrix.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        x = linalg.solve(system, rhs)
    except linalg.LinAlgError as exc:
        raise SingularMatrix(f"{name} 的平稳方程奇异: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrix(f"{name} 的平稳向量含非有限值")
    return x


def solve_left(vec: np.ndarray, matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """求解 x · matrix = vec"""
    try:
        return linalg.solve(matrix.T, vec)
    except linalg.LinAlgError as exc:
        raise SingularMatrix(f"{name} 奇异: {exc}") from exc


def inverse(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """带奇异检测的矩阵求逆"""
    try:
        inv = linalg.inv(matrix)
    except linalg.LinAlgError as exc:
        raise SingularMatrix(f"{name} 奇异: {exc}") from exc
    if not np.all(np.isfinite(inv)):
        raise SingularMatrix(f"{name} 的逆含非有限值")
    return inv


def spectral_radius(matrix: np.ndarray) -> float:
    """谱半径"""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(linalg.eigvals(matrix))))


def is_strongly_connected(matrix: np.ndarray, threshold: float = 0.0) -> bool:
    """
    判断支撑图 (元素 > threshold 的边) 是否强连通

    Args:
        matrix: 方阵
        threshold: 视为边的最小元素值

    Returns:
        强连通时为 True
    """
    if matrix.shape[0] <= 1:
        return True
    graph = csr_matrix((matrix > threshold).astype(np.int8))
    n_components, _ = connected_components(graph, directed=True, connection="strong")
    return n_components == 1


def matrix_powers(g: np.ndarray, count: int, out: Optional[np.ndarray] = None) -> np.ndarray:
    """
    计算 G^0, G^1, ..., G^{count-1}

    以倍增方式批量相乘, 每轮一次批量 matmul。

    Args:
        g: (m, m) 矩阵
        count: 幂次个数
        out: 可选的输出缓冲区

    Returns:
        (count, m, m) 数组
    """
    m = g.shape[0]
    powers = out if out is not None else np.empty((count, m, m))
    if count == 0:
        return powers
    powers[0] = np.eye(m)
    if count == 1:
        return powers
    powers[1] = g
    filled = 2
    while filled < count:
        step = powers[filled - 1] @ g  # G^filled
        take = min(filled, count - filled)
        np.matmul(powers[:take], step, out=powers[filled:filled + take])
        filled += take
    return powers
