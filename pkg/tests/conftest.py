import numpy as np
import pytest

from mdclt import make_ma_process


@pytest.fixture
def ma1_p1():
    """p=1 MA(1) with theta=0.5: Gamma_0 = 1.25, Gamma_1 = 0.5."""
    return make_ma_process(1, 1, [1.0, 0.5], "gaussian")


@pytest.fixture
def ma2_p3():
    B = np.array([[1.0, 0.3, 0.0], [0.0, 1.0, 0.3], [0.3, 0.0, 1.0]])
    return make_ma_process(3, 2, [B, 0.5 * B, 0.25 * B], "rademacher")
