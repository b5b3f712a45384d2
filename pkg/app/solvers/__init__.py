"""求解器: 矩阵解析法、LI 截断与有限链对照"""
from .mam import StationarySolution, compute_G, ramaswami_pi
from .truncation import error_metrics, li_truncate, pi_truncated, truncated_drift

__all__ = [
    'StationarySolution', 'compute_G', 'ramaswami_pi',
    'li_truncate', 'pi_truncated', 'truncated_drift', 'error_metrics',
]
