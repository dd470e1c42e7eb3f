"""Independent reference computations used by the tests.

These deliberately take different routes than the library: pointwise
evaluation instead of interval arithmetic, explicit composition-word
expansion instead of sweeping.  Agreement between the two routes is the
point of the tests that import this module.
"""

import math

import numpy as np

LN3 = math.log(3.0)
LN32 = math.log(1.5)
LN43 = math.log(4.0 / 3.0)

# absolute weights of the three reading positions in the fixed-point map,
# after dividing the recursion by its dominant coefficient
W_UP3 = 1.0 / 99.0
W_UP32 = 4.0 / 11.0
W_DOWN43 = 56.0 / 99.0
RATIO = W_UP3 + W_UP32 + W_DOWN43  # = 31/33


def convolution_by_partition(f, g, t: float) -> float:
    """(f * g)(t) for piecewise-constant f, g by midpoint evaluation.

    The integrand s -> f(s) g(t - s) is constant between cuts drawn from
    the breakpoints of f and the reflected breakpoints of g, so one
    midpoint sample per piece integrates it exactly (up to float
    rounding).  Uses only the public __call__ of both functions.
    """
    cuts = sorted(
        {float(b) for b in f.breakpoints} | {t - float(b) for b in g.breakpoints}
    )
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        mid = 0.5 * (a + b)
        total += f(mid) * g(t - mid) * (b - a)
    return total


def neumann_word_sum(m_func, y, depth: int) -> np.ndarray:
    """Partial fixed-point series by explicit word expansion.

    Applies the shift map to the source term word by word: a word of
    length d with i upward ln3-shifts, j upward ln(3/2)-shifts and k
    downward ln(4/3)-shifts contributes its multinomial count times the
    product of the per-shift weights, evaluated at the accumulated offset.
    Cost grows like depth^3, fine for the depths the tests use.
    """
    y = np.asarray(y, dtype=float)
    total = np.zeros_like(y)
    for d in range(depth + 1):
        for i in range(d + 1):
            for j in range(d - i + 1):
                k = d - i - j
                count = math.comb(d, i) * math.comb(d - i, j)
                weight = count * W_UP3**i * W_UP32**j * W_DOWN43**k
                # signs: the two upward weights are +, the downward is +,
                # and the source enters with a minus at every depth
                shift = i * LN3 + j * LN32 - k * LN43
                total += weight * (-(8.0 / 99.0)) * m_func(y + shift - LN43)
    return total


def neumann_tail_bound(m_sup: float, depth: int) -> float:
    """Geometric bound on the truncated remainder of the word expansion.

    Each extra depth multiplies the reachable mass by the weight sum
    31/33; summing the discarded geometric tail from depth + 1 gives
    (8/99) m_sup * (31/33)^(depth+1) / (1 - 31/33).
    """
    return (8.0 / 99.0) * m_sup * RATIO ** (depth + 1) / (1.0 - RATIO)
