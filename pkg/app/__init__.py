"""M/G/1 型马尔可夫链截断误差分析工具包"""
__version__ = "2.0.0"
