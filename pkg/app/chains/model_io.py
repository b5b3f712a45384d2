"""模型 JSON 读写"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from app.chains.model import MG1Model, ParametricTail
from app.chains.tails import TailDistribution
from app.errors import MG1Error, ModelFormatError
from app.fileio import atomic_write_text

logger = logging.getLogger(__name__)


def _indexed_blocks(entries: Any, first: int, label: str) -> List[Any]:
    """把 [{k, matrix}, …] 排成从 first 开始的连续列表, 缺失下标填 None"""
    if not isinstance(entries, list) or not entries:
        raise ModelFormatError(f"{label} 必须是非空数组")
    by_k: Dict[int, Any] = {}
    for item in entries:
        if not isinstance(item, dict) or "k" not in item or "matrix" not in item:
            raise ModelFormatError(f"{label} 的元素需包含 k 与 matrix 字段")
        k = int(item["k"])
        if k < first:
            raise ModelFormatError(f"{label} 的下标 {k} 小于 {first}")
        if k in by_k:
            raise ModelFormatError(f"{label} 的下标 {k} 重复")
        by_k[k] = item["matrix"]
    if first not in by_k:
        raise ModelFormatError(f"{label} 缺少 k={first} 的块")
    return [by_k.get(k) for k in range(first, max(by_k) + 1)]


def _tail_from_dict(data: Optional[Dict[str, Any]]) -> Optional[ParametricTail]:
    if data is None or str(data.get("family", "none")).lower() == "none":
        return None
    if "row_scale" not in data or "col_profile" not in data:
        raise ModelFormatError("参数尾需要 row_scale 与 col_profile 字段")
    return ParametricTail(
        distribution=TailDistribution.from_dict(data),
        row_scale=np.asarray(data["row_scale"], dtype=float),
        col_profile=np.asarray(data["col_profile"], dtype=float),
    )


def model_from_dict(data: Dict[str, Any]) -> MG1Model:
    """
    从字典构造模型

    Args:
        data: 与模型 JSON 同构的字典

    Returns:
        MG1Model
    """
    try:
        m0, m1 = int(data["m0"]), int(data["m1"])
        a_raw = _indexed_blocks(data["a_blocks"], -1, "a_blocks")
        b_raw = _indexed_blocks(data["b_blocks"], 0, "b_blocks")
        b_down = data["b_down"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"模型字段缺失或类型错误: {exc}") from exc

    a_blocks = [np.zeros((m1, m1)) if b is None else b for b in a_raw]
    b_blocks = [
        (np.zeros((m0, m0)) if k == 0 else np.zeros((m0, m1))) if b is None else b
        for k, b in enumerate(b_raw)
    ]
    try:
        return MG1Model(
            m0=m0,
            m1=m1,
            a_blocks=tuple(a_blocks),
            b_down=b_down,
            b_blocks=tuple(b_blocks),
            a_tail=_tail_from_dict(data.get("a_tail")),
            b_tail=_tail_from_dict(data.get("b_tail")),
            name=str(data.get("name", "")),
        )
    except MG1Error:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"模型数据无法解析: {exc}") from exc


def model_to_dict(model: MG1Model) -> Dict[str, Any]:
    """模型转为 JSON 兼容字典"""
    return {
        "name": model.name,
        "m0": model.m0,
        "m1": model.m1,
        "a_blocks": [{"k": k - 1, "matrix": b.tolist()} for k, b in enumerate(model.a_blocks)],
        "b_down": model.b_down.tolist(),
        "b_blocks": [{"k": k, "matrix": b.tolist()} for k, b in enumerate(model.b_blocks)],
        "a_tail": model.a_tail.to_dict() if model.a_tail is not None else None,
        "b_tail": model.b_tail.to_dict() if model.b_tail is not None else None,
    }


def load_model(path: Union[str, Path]) -> MG1Model:
    """
    读取模型文件

    Args:
        path: JSON 文件路径

    Returns:
        MG1Model
    """
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"模型文件 {path} 不是合法 JSON: {exc}") from exc
    except OSError as exc:
        raise ModelFormatError(f"无法读取模型文件 {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelFormatError(f"模型文件 {path} 顶层必须是对象")
    model = model_from_dict(data)
    logger.debug("已读取模型 %s (M0=%d, M1=%d, K_A=%d, K_B=%d)", path, model.m0, model.m1, model.k_a, model.k_b)
    return model


def save_model(model: MG1Model, path: Union[str, Path]) -> None:
    """写出模型文件"""
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n")
