"""Shared CSV number formatting.

Values with 0 < |x| < 1e-3 are written in scientific notation; everything
else uses the shortest round-trip representation. Both forms are lossless.
"""
import math

import numpy as np


def fnum(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x != 0 and abs(x) < 1e-3:
        return np.format_float_scientific(x, unique=True, trim="-", exp_digits=2)
    return repr(x)
