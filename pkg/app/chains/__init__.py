"""链模型: 块矩阵序列、尾分布与生成器"""
from .model import MG1Model, ParametricTail, ValidationReport, validate
from .model_io import load_model, model_from_dict, model_to_dict, save_model
from .tails import EmpiricalTail, GeometricTail, ParetoTail, TailDistribution, WeibullTail, make_tail

__all__ = [
    'MG1Model', 'ParametricTail', 'ValidationReport', 'validate',
    'load_model', 'save_model', 'model_from_dict', 'model_to_dict',
    'TailDistribution', 'ParetoTail', 'WeibullTail', 'GeometricTail', 'EmpiricalTail', 'make_tail',
]
