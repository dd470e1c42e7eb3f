"""Apply the lattice shift operator to test functions and cross-check.

For a fixed grid draw the operator takes f to

    sum_I gamma(|I|) <g_I, f> h_I(x)

over admitted cells I; only the cell containing x matters at each level,
and the pairing <g_I, f> vanishes whenever f is affine on I because the
generator g has zero mean and zero first moment.  Averaging over draws is
compared against the direct principal-value convolution.

Pairings are exact: test functions are piecewise-constant or
piecewise-linear with rational knots, so Monte-Carlo noise is the only
stochastic error in the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import dyadic
from .dyadic import _H_VALUES, _gamma_eval, _quarter_index
from .kernels import KernelSpec, kernel_value
from .piecewise import (
    Interval,
    PiecewiseLinear,
    StepFunction,
    integrate_pl,
    make_g,
    rescale_to_interval,
)
from .solver import CoefficientTable

__all__ = [
    "TestFunction",
    "indicator_function",
    "triangle_function",
    "haar_pairing",
    "apply_shift",
    "apply_averaged",
    "AveragedValue",
    "direct_pv",
    "OperatorError",
]


class OperatorError(RuntimeError):
    """Raised when an operator computation cannot certify its result."""


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported piecewise function with a fast antiderivative.

    Wraps either representation; the cumulative integral F is precomputed
    at the knots so that pairings against quarter-split cells reduce to
    four F evaluations per cell.
    """

    # not a test case, despite the name pytest keys on
    __test__ = False

    base: StepFunction | PiecewiseLinear

    @property
    def knots(self) -> tuple:
        if isinstance(self.base, StepFunction):
            return self.base.breakpoints
        return self.base.knots

    @property
    def support(self) -> tuple[float, float]:
        ks = self.knots
        return float(ks[0]), float(ks[-1])

    def __call__(self, t):
        return self.base(t)

    @cached_property
    def _tables(self):
        ks = np.array([float(k) for k in self.knots])
        if isinstance(self.base, StepFunction):
            vals = np.asarray(self.base.values, dtype=float)
            cum = np.concatenate([[0.0], np.cumsum(vals * np.diff(ks))])
            return ks, cum, vals, None
        vals = np.asarray(self.base.values, dtype=float)
        avg = 0.5 * (vals[:-1] + vals[1:])
        cum = np.concatenate([[0.0], np.cumsum(avg * np.diff(ks))])
        slopes = np.diff(vals) / np.diff(ks)
        return ks, cum, vals, slopes

    def antiderivative(self, t):
        """F(t) = integral of f from the left support edge to t, vectorized."""
        t = np.asarray(t, dtype=float)
        ks, cum, vals, slopes = self._tables
        idx = np.clip(np.searchsorted(ks, t, side="right") - 1, 0, len(ks) - 2)
        d = np.clip(t - ks[idx], 0.0, None)
        d = np.minimum(d, ks[idx + 1] - ks[idx])
        if slopes is None:
            out = cum[idx] + vals[idx] * d
        else:
            out = cum[idx] + vals[idx] * d + 0.5 * slopes[idx] * d * d
        out = np.where(t <= ks[0], 0.0, np.where(t >= ks[-1], cum[-1], out))
        return out if out.ndim else float(out)


def indicator_function() -> TestFunction:
    """The indicator of [0, 1]."""
    return TestFunction(StepFunction([0, 1], [1.0]))


def triangle_function() -> TestFunction:
    """The unit tent on [0, 2], peak 1 at 1."""
    return TestFunction(PiecewiseLinear([0, 1, 2], [0.0, 1.0, 0.0]))


def haar_pairing(g_step: StepFunction, f: TestFunction) -> float:
    """Exact integral of g_step * f."""
    if isinstance(f.base, StepFunction):
        return g_step.integral_against(f.base)
    total = 0.0
    for w, a, b in zip(g_step.values, g_step.breakpoints, g_step.breakpoints[1:]):
        if w != 0:
            total += w * integrate_pl(f.base, a, b)
    return total


def apply_shift(
    s: dyadic.GridSample,
    table,
    f: TestFunction,
    x: float,
    levels: dyadic.LevelRange,
    stats: dict | None = None,
) -> float:
    """Operator value at x for one grid draw.

    Per level only the cell containing x is consulted, and it is skipped
    outright when it misses the support of f; `stats["intervals"]` counts
    the cells actually paired.
    """
    lo, hi = f.support
    g = make_g()
    total = 0.0
    for n in levels:
        cell = dyadic.interval_containing(s, n, x)
        if cell.right <= lo or cell.left >= hi:
            continue
        if stats is not None:
            stats["intervals"] = stats.get("intervals", 0) + 1
        pairing = haar_pairing(rescale_to_interval(g, cell), f)
        if pairing == 0.0:
            continue
        tx = (x - cell.left) / cell.length
        h_val = float(_H_VALUES[min(int(tx * 4), 3)])
        g_val = float(np.atleast_1d(_gamma_eval(table, np.asarray([cell.length])))[0])
        total += g_val * pairing * h_val / math.sqrt(cell.length)
    return total


def _operator_terms(gamma, f: TestFunction, x: float) -> Callable:
    """Vectorized level-term function for the averaged operator at x.

    The pairing against the quarter-split cell collapses to a four-point
    combination of the antiderivative:
    <g_I, f> = (F(a) - 2 F(a + L/4) + 2 F(a + 3L/4) - F(a + L)) / sqrt(L),
    and h_I(x) contributes another 1/sqrt(L).
    """
    F = f.antiderivative

    def term(n: int, r: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        length = r * 2.0**n
        px = x / length - sigma
        k = np.floor(px)
        tx = px - k
        a = (k + sigma) * length
        comb = (
            F(a)
            - 2.0 * F(a + 0.25 * length)
            + 2.0 * F(a + 0.75 * length)
            - F(a + length)
        )
        return _gamma_eval(gamma, length) * _H_VALUES[_quarter_index(tx)] * comb / length

    return term


@dataclass
class AveragedValue:
    """Averaged operator value at one probe."""

    x: float
    mean: float
    stderr: float
    tail_bound: float
    num_samples: int
    seed: int
    levels: dyadic.LevelRange

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "mean": self.mean,
            "stderr": self.stderr,
            "tail_bound": self.tail_bound,
            "M": self.num_samples,
            "seed": self.seed,
            "n_min": self.levels.n_min,
            "n_max": self.levels.n_max,
        }


def _default_levels(
    table: CoefficientTable, f: TestFunction, x: float, tol_tail: float
) -> tuple[dyadic.LevelRange, float]:
    dist = min(abs(x - float(k)) for k in f.knots)
    if dist < 2.0**-40:
        raise ValueError(
            "probe coincides with a knot of f; the level range is unbounded there"
        )
    gamma_sup = table.sup_norm()
    n_cut = dyadic.cutoff_for_tolerance(gamma_sup, tol_tail)
    n_min = math.floor(math.log2(dist)) - 1
    levels = dyadic.LevelRange(n_min, max(n_cut - 1, n_min))
    return levels, dyadic.tail_bound_value(gamma_sup, levels.n_max + 1)


def apply_averaged(
    table: CoefficientTable,
    f: TestFunction,
    xs: Sequence[float],
    num_samples: int,
    seed: int = 0,
    tol_tail: float = 1e-4,
    threads: int | None = None,
    levels: dyadic.LevelRange | None = None,
) -> list[AveragedValue]:
    """Average the operator over grid draws at each probe.

    The level floor adapts per probe: cells shorter than the distance from
    the probe to the nearest knot of f pair to zero (f is affine on them),
    so they are excluded a priori.  The ceiling comes from the requested
    tail tolerance.
    """
    if num_samples < 1:
        raise ValueError("need at least one draw")
    ln2 = math.log(2.0)
    out = []
    for x in xs:
        x = float(x)
        if levels is None:
            lv, tail = _default_levels(table, f, x, tol_tail)
        else:
            lv = levels
            tail = dyadic.tail_bound_value(table.sup_norm(), lv.n_max + 1)
        total, total_sq = dyadic.accumulate_samples(
            seed, num_samples, lv, _operator_terms(table, f, x), threads=threads
        )
        mean = ln2 * total / num_samples
        if num_samples > 1:
            var = (total_sq - total * total / num_samples) / (num_samples - 1)
            stderr = ln2 * math.sqrt(max(var, 0.0) / num_samples)
        else:
            stderr = float("nan")
        out.append(
            AveragedValue(
                x=x,
                mean=mean,
                stderr=stderr,
                tail_bound=tail,
                num_samples=num_samples,
                seed=seed,
                levels=lv,
            )
        )
    return out


_PV_GL_NODES, _PV_GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def direct_pv(
    spec: KernelSpec,
    f: TestFunction,
    x: float,
    eps_schedule: Sequence[float] | None = None,
    atol: float = 1e-10,
) -> float:
    """Principal-value convolution at x by symmetric exclusion.

    Integrates K(x - t) f(t) outside |t - x| > eps on panels that double
    away from the singularity (splitting at the knots of f), then removes
    the O(eps) exclusion error by eliminating the linear term between
    consecutive schedule entries, stopping once successive extrapolants
    agree within atol.
    """
    if eps_schedule is None:
        eps_schedule = [2.0**-k for k in range(10, 31)]
    eps_schedule = sorted(set(float(e) for e in eps_schedule), reverse=True)
    if len(eps_schedule) < 2:
        raise OperatorError("need at least two exclusion radii to extrapolate")

    lo, hi = f.support
    knots = [float(k) for k in f.knots]

    def integral_outside(eps: float) -> float:
        total = 0.0
        for sign in (-1, 1):
            if sign < 0:
                a, b = lo, min(hi, x - eps)
            else:
                a, b = max(lo, x + eps), hi
            if b <= a:
                continue
            # doubling panel edges anchored at the singularity
            edges = {a, b}
            edges.update(k for k in knots if a < k < b)
            d = eps
            while True:
                t = x + sign * d
                if sign < 0 and t <= a or sign > 0 and t >= b:
                    break
                if a < t < b:
                    edges.add(t)
                d *= 2.0
            cuts = sorted(edges)
            for p, q in zip(cuts, cuts[1:]):
                mid = 0.5 * (p + q)
                half = 0.5 * (q - p)
                t = mid + half * _PV_GL_NODES
                vals = kernel_value(spec, x - t) * np.asarray(f(t), dtype=float)
                total += half * float(np.dot(_PV_GL_WEIGHTS, vals))
        return total

    prev_eps = eps_schedule[0]
    prev_i = integral_outside(prev_eps)
    extrapolated = None
    last_diff = math.inf
    for eps in eps_schedule[1:]:
        cur_i = integral_outside(eps)
        # eliminate the O(eps) exclusion term from the pair (eps, prev_eps);
        # for a halving schedule this is exactly 2 I(eps) - I(2 eps)
        new_ex = (prev_eps * cur_i - eps * prev_i) / (prev_eps - eps)
        if extrapolated is not None:
            last_diff = abs(new_ex - extrapolated)
            if last_diff < atol:
                return new_ex
        extrapolated = new_ex
        prev_eps, prev_i = eps, cur_i
    raise OperatorError(
        f"principal value did not settle within atol={atol:g} "
        f"(last extrapolant change {last_diff:.3e})"
    )
