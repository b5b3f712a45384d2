"""CSV / JSON 结果输出"""
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from app.analysis.asymptotics import ConvergenceReport
from app.fileio import atomic_write_text
from app.solvers.mam import StationarySolution

SWEEP_COLUMNS = (
    "N", "k", "err_signed", "err_l1", "ratio_F", "ratio_DI", "ratio_pitail",
    "rel_tv_ratio", "target_theta_pik", "target_thetaDI_pik", "target_pik",
)


def fmt(value: Any) -> str:
    """数值按 17 位有效数字输出, 可无损回读为 binary64"""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else fmt(cell) for cell in row])
    return buffer.getvalue()


def solution_csv(solution: StationarySolution) -> str:
    """
    π(k) 的 CSV: k, phase, pi; 相位从 1 起编号, 末尾附 mass 与 residual 行

    Args:
        solution: 平稳分布

    Returns:
        CSV 文本
    """
    rows: List[Sequence[Any]] = []
    for k, block in enumerate(solution.pi_blocks):
        for phase, value in enumerate(block, start=1):
            rows.append((k, phase, value))
    rows.append(("mass", "", solution.mass))
    rows.append(("residual", "", solution.residual))
    return _csv_text(("k", "phase", "pi"), rows)


def sweep_csv(report: ConvergenceReport) -> str:
    """收敛扫描 CSV, 每个 (N, k) 一行"""
    rows = (
        (
            r.n, r.k, r.err_signed, r.err_l1, r.ratio_F, r.ratio_DI, r.ratio_pitail,
            r.rel_tv_ratio, r.target_theta_pik, r.target_thetaDI_pik, r.target_pik,
        )
        for r in report.rows
    )
    return _csv_text(SWEEP_COLUMNS, rows)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"无法序列化 {type(obj).__name__}")


def to_json(data: Any) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False, default=_json_default) + "\n"


def emit(text: str, output: Optional[Union[str, Path]] = None) -> None:
    """
    写出结果: 指定路径时原子写文件, 否则写到标准输出

    Args:
        text: 内容
        output: 输出路径
    """
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        atomic_write_text(output, text)
