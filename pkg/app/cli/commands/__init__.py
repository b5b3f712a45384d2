"""子命令模块"""
from . import generate, solve, sweep, validate, verify

COMMANDS = {module.NAME: module for module in (validate, solve, sweep, verify, generate)}

__all__ = ['COMMANDS']
