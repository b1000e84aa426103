# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Dict

import numpy as np


# Absolute tolerances used by tests and runtime checks, per floating precision.
SOFTMAX_ROW_SUM: Dict[str, float] = {"float64": 1e-12, "float32": 1e-6}
GRAD_CHECK_RELATIVE: Dict[str, float] = {"float64": 1e-4, "float32": 5e-2}
EXACT_MATCH: Dict[str, float] = {"float64": 1e-12, "float32": 1e-5}

# Additive logit used for masked keys. exp(MASK_LOGIT - rowmax) underflows to exactly 0 in both precisions.
MASK_LOGIT: float = -1e9


def tolerance(table: Dict[str, float], dtype: np.dtype) -> float:
    return table[np.dtype(dtype).name]
