"""工具包异常定义"""


class MG1Error(Exception):
    """所有 M/G/1 工具包异常的基类"""


class ModelFormatError(MG1Error, ValueError):
    """模型文件无法解析"""


class DimensionMismatch(MG1Error, ValueError):
    """块矩阵尺寸与相位数不一致"""


class InvalidModel(MG1Error, ValueError):
    """模型数据非法 (负元素、非有限值等)"""


class MassMismatch(MG1Error, ValueError):
    """行概率质量之和不为 1"""


class InvalidTail(MG1Error, ValueError):
    """尾分布参数越界或尾部为零"""


class CannotReachDrift(MG1Error, ValueError):
    """生成器无法达到目标漂移"""


class NotFiniteSupport(MG1Error, ValueError):
    """操作要求有限支撑模型"""


class HorizonTooShort(MG1Error, ValueError):
    """解的层数不足以覆盖请求范围"""


class SeriesNotConvergent(MG1Error, RuntimeError):
    """级数在迭代上限内无法达到容差"""


class NotConverged(MG1Error, RuntimeError):
    """迭代在最大次数内未收敛"""

    def __init__(self, max_iter: int, message: str = "") -> None:
        self.max_iter = max_iter
        super().__init__(message or f"迭代 {max_iter} 次后仍未收敛")


class DriftNonNegative(MG1Error, RuntimeError):
    """平均漂移 σ ≥ 0, 链非正常返"""


class SingularMatrix(MG1Error, RuntimeError):
    """线性系统数值奇异"""


class NotIrreducible(MG1Error, RuntimeError):
    """有限链不可约性检查失败"""


class TruncationBiasTooLarge(MG1Error, RuntimeError):
    """有限链增广偏差超过容差"""


class Divergent(MG1Error, RuntimeError):
    """参考分布与模型尾部不匹配, 比值发散"""


class DegenerateLimit(MG1Error, RuntimeError):
    """c_A 与 c_B 同时为零; mismatch 表示比值序列在网格上未稳定"""

    def __init__(self, message: str = "", mismatch: bool = False) -> None:
        self.mismatch = mismatch
        super().__init__(message)


class ReferenceMismatch(MG1Error, RuntimeError):
    """扫描时参考分布被判定为不匹配"""
