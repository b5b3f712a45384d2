"""渐近分析与结果输出"""
