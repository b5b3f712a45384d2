"""子命令共用的参数与模型加载"""
import argparse
from dataclasses import replace
from pathlib import Path
from typing import Optional

from app.chains.generators import PRESETS, preset
from app.chains.model import MG1Model
from app.chains.model_io import load_model
from app.errors import ModelFormatError
from app.settings import Settings

PRESET_PREFIX = "preset:"


def add_model_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "model",
        help=f"模型 JSON 文件, 或 {PRESET_PREFIX}<名称> (可选: {', '.join(PRESETS)})",
    )


def add_output_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-o", "--output", type=Path, default=None, help="输出文件, 缺省写到标准输出")


def open_model(source: str, settings: Optional[Settings] = None) -> MG1Model:
    """
    按路径或预置名加载模型

    Args:
        source: 文件路径或 'preset:<名称>'
        settings: 给出时用其中的 eps_tail 与 series_cap 控制尾级数截断

    Returns:
        MG1Model
    """
    if source.startswith(PRESET_PREFIX):
        try:
            model = preset(source[len(PRESET_PREFIX):])
        except KeyError as exc:
            raise ModelFormatError(str(exc)) from exc
    else:
        model = load_model(source)
    if settings is None:
        return model
    tol = settings.tolerances
    if (model.eps_tail, model.series_cap) == (tol.eps_tail, tol.series_cap):
        return model
    return replace(model, eps_tail=tol.eps_tail, series_cap=tol.series_cap)


def int_list(text: str) -> list:
    """'32,64,128' → [32, 64, 128]"""
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"无法解析整数列表: {text!r}") from exc
