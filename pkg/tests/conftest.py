import numpy as np
import pytest

from haarshift import KernelSpec, get_kernel, solve_c

# Every table solved anywhere in the suite lands here so the contraction
# ratio can be asserted across all runs, not just the ones a given test
# happens to make.
TRACKED_TABLES: list = []


def solve_tracked(spec, **kwargs):
    table = solve_c(spec, **kwargs)
    TRACKED_TABLES.append(table)
    return table


def tent_m(u):
    """Synthetic compactly supported source term: unit tent on [-1/2, 1/2]."""
    u = np.asarray(u, dtype=float)
    return np.maximum(0.0, 1.0 - 2.0 * np.abs(u))


def tent_spec() -> KernelSpec:
    # driven purely through m_eval; the kernel evaluators are never touched
    # by the solver, so there is no kernel to supply
    return KernelSpec(name="synthetic-tent", k=None, k1=None, k2=None, m_eval=tent_m)


@pytest.fixture(scope="session")
def hilbert_table():
    return solve_tracked(get_kernel("hilbert"), step=2.0**-7)


@pytest.fixture(scope="session")
def cp_table():
    return solve_tracked(get_kernel("conjugate-poisson"), step=2.0**-8)


@pytest.fixture(scope="session")
def smoothed_table():
    return solve_tracked(get_kernel("smoothed-truncated"), step=2.0**-8)


@pytest.fixture(scope="session")
def tent_table():
    return solve_tracked(tent_spec(), step=2.0**-8)
