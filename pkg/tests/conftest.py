import numpy as np
import pytest

from quartet_gauss.energy import VariationalPoint
from quartet_gauss.majorana import (
    ModeLayout,
    QuadraticTensor,
    antisymmetrize_quartic,
    random_orthogonal,
)

# (n_sites, modes_per_site, quartets); the last two leave modes outside any quartet
LAYOUTS = [
    ModeLayout(1, 4, ((0, 1, 2, 3),)),
    ModeLayout(2, 2, ((0, 1, 2, 3),)),
    ModeLayout(3, 2, ((1, 2, 4, 5),)),
    ModeLayout(4, 2, ((0, 1, 2, 3), (4, 5, 6, 7))),
]


def random_instance(rng, layout, n_quartic=12, beta_scale=1.0, o_scale=1.0):
    d = layout.d
    a = rng.normal(size=(d, d))
    T = QuadraticTensor(0.5 * (a - a.T))
    raw = []
    for _ in range(n_quartic):
        idx = rng.choice(d, size=4, replace=False)
        raw.append((*idx, rng.normal()))
    W = antisymmetrize_quartic(raw, d=d)
    point = VariationalPoint(
        rng.uniform(-beta_scale, beta_scale, layout.n_quartets),
        random_orthogonal(d, rng, o_scale),
    )
    return T, W, point


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
