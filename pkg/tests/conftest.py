import numpy as np
import pytest

from morozov import linops, problems
from morozov.dual import diagnose_regime


def assert_adjoint_consistent(op, n_probes=100, rtol=1e-10, seed=1234):
    """<A f, y> == <f, A* y> on random probe pairs, relative error <= rtol."""
    rng = np.random.default_rng(seed)
    for _ in range(n_probes):
        f = rng.standard_normal(op.dims.dim_f)
        y = rng.standard_normal(op.dims.dim_g)
        lhs = float(op.apply(f) @ y)
        rhs = float(f @ op.apply_adjoint(y))
        denom = max(abs(lhs), abs(rhs), 1e-30)
        assert abs(lhs - rhs) / denom <= rtol, (lhs, rhs)


def random_dense_op(rng, dim_g, dim_f, scale=1.0):
    return linops.from_matrix(scale * rng.standard_normal((dim_g, dim_f)))


def make_interior_problem(seed, kind="deconvolution"):
    """A random problem certified to be in the interior regime."""
    rng = np.random.default_rng(seed)
    if kind == "deconvolution":
        n = int(rng.integers(16, 65))
        A = problems.make_deconvolution(n, kernel_width=rng.uniform(0.8, 2.5))
    elif kind == "hilbert":
        A = problems.make_hilbert(int(rng.integers(5, 13)))
    else:
        raise ValueError(kind)
    f0 = problems._bump_profile(A.dims.dim_f, rng)
    prob = problems.synthesize(
        A, f0, noise_level=rng.uniform(0.02, 0.15), seed=seed
    )
    diag = diagnose_regime(prob.op, prob.g, prob.tau)
    assert diag.regime == "interior", f"seed {seed} not interior: {diag}"
    return prob


@pytest.fixture
def rng():
    return np.random.default_rng(0)
