# Directional Trend Smoothing
__version__ = "1.0.0"
