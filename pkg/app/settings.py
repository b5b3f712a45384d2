"""配置加载: config/settings.json"""
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

logger = logging.getLogger(__name__)

# 项目根目录下的默认配置文件
DEFAULT_SETTINGS_PATH = Path(__file__).resolve().parent.parent / "config" / "settings.json"

WORKERS_ENV = "MG1_WORKERS"


@dataclass(frozen=True)
class Tolerances:
    """数值容差"""

    eps_stoch: float = 1e-10
    eps_tail: float = 1e-12
    eps_solve: float = 1e-12
    eps_check: float = 1e-9
    eps_g: float = 1e-10
    eps_mass: float = 1e-6
    series_cap: int = 10_000_000


@dataclass(frozen=True)
class SolverSettings:
    """G 矩阵迭代与 Ramaswami 递推参数"""

    g_tol: float = 1e-14
    g_max_iter: int = 100_000
    spot_check_levels: int = 50


@dataclass(frozen=True)
class Settings:
    """工具包全部配置"""

    tolerances: Tolerances = field(default_factory=Tolerances)
    solver: SolverSettings = field(default_factory=SolverSettings)
    k_max: int = 20
    workers: int = 4
    ref_factor: int = 16
    anchor: tuple = (0, 0)
    bias_tol: float = 1e-6
    log_level: str = "WARNING"

    def with_overrides(self, **changes: Any) -> "Settings":
        """
        返回覆盖部分字段后的新配置

        Args:
            changes: 顶层字段, 或 Tolerances / SolverSettings 中的字段名

        Returns:
            新的 Settings
        """
        tol_changes = {k: v for k, v in changes.items() if hasattr(self.tolerances, k) and v is not None}
        solver_changes = {k: v for k, v in changes.items() if hasattr(self.solver, k) and v is not None}
        top_changes = {
            k: v for k, v in changes.items()
            if k not in tol_changes and k not in solver_changes and v is not None
        }
        return replace(
            self,
            tolerances=replace(self.tolerances, **tol_changes),
            solver=replace(self.solver, **solver_changes),
            **top_changes,
        )


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name, {})
    return value if isinstance(value, dict) else {}


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """
    读取 JSON 配置文件

    缺失的键使用内置默认值; 环境变量 MG1_WORKERS 覆盖并发数。

    Args:
        path: 配置文件路径, 默认为 config/settings.json

    Returns:
        Settings 对象
    """
    settings_path = Path(path) if path is not None else DEFAULT_SETTINGS_PATH
    raw: Dict[str, Any] = {}
    if settings_path.is_file():
        with settings_path.open("r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        logger.debug("配置文件 %s 不存在, 使用默认配置", settings_path)

    defaults = Settings()
    tol = _section(raw, "tolerances")
    solver = _section(raw, "solver")
    metrics = _section(raw, "metrics")
    sweep = _section(raw, "sweep")
    oracle = _section(raw, "oracle")
    log_cfg = _section(raw, "logging")

    tolerances = Tolerances(
        eps_stoch=float(tol.get("eps_stoch", defaults.tolerances.eps_stoch)),
        eps_tail=float(tol.get("eps_tail", defaults.tolerances.eps_tail)),
        eps_solve=float(tol.get("eps_solve", defaults.tolerances.eps_solve)),
        eps_check=float(tol.get("eps_check", defaults.tolerances.eps_check)),
        eps_g=float(tol.get("eps_g", defaults.tolerances.eps_g)),
        eps_mass=float(tol.get("eps_mass", defaults.tolerances.eps_mass)),
        series_cap=int(tol.get("series_cap", defaults.tolerances.series_cap)),
    )
    solver_settings = SolverSettings(
        g_tol=float(solver.get("g_tol", defaults.solver.g_tol)),
        g_max_iter=int(solver.get("g_max_iter", defaults.solver.g_max_iter)),
        spot_check_levels=int(solver.get("spot_check_levels", defaults.solver.spot_check_levels)),
    )

    workers = int(sweep.get("workers", defaults.workers))
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        try:
            workers = int(env_workers)
        except ValueError:
            logger.warning("忽略无效的 %s=%r", WORKERS_ENV, env_workers)

    return Settings(
        tolerances=tolerances,
        solver=solver_settings,
        k_max=int(metrics.get("k_max", defaults.k_max)),
        workers=max(1, workers),
        ref_factor=int(sweep.get("ref_factor", defaults.ref_factor)),
        anchor=(
            int(oracle.get("anchor_level", defaults.anchor[0])),
            int(oracle.get("anchor_phase", defaults.anchor[1])),
        ),
        bias_tol=float(oracle.get("bias_tol", defaults.bias_tol)),
        log_level=str(log_cfg.get("level", defaults.log_level)),
    )


DEFAULT_SETTINGS = Settings()
