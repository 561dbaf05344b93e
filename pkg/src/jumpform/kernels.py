"""Jump kernels k(x, y) on R^n and their symmetric/antisymmetric split.

A kernel is a nonnegative measurable function of a pair of points.  The
split is

    k_s(x, y) = (k(x, y) + k(y, x)) / 2,
    k_a(x, y) = (k(x, y) - k(y, x)) / 2,

so k = k_s + k_a, k_s is symmetric, k_a antisymmetric, and nonnegativity
of k forces |k_a| <= k_s pointwise.

The distinguished family is the stable-like kernel

    k(x, y) = w(x) |x - y|^(-n - alpha(x)),

whose weight w makes the operator built from it act on plane waves with
multiplier -|xi|^alpha(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from ._gamma import gamma
from .errors import DomainError, NegativeKernel
from .gridfn import Box

__all__ = [
    "AlphaFunction",
    "JumpKernel",
    "SplitKernel",
    "split",
    "transpose",
    "weight_w",
    "stable_like_kernel",
    "beta_modulus",
    "beta_profile",
]


# ---------------------------------------------------------------------------
# variable order alpha(x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaFunction:
    """A variable order x -> alpha(x) with range inside (0, 2).

    ``fn`` must be vectorised over points of shape (..., n) -> (...,).
    ``alpha1`` and ``alpha2`` are the declared infimum/supremum of the range;
    they drive closed-form tail bounds, so they must genuinely bound fn.
    Optional ``d1``/``d2`` closures give the gradient (..., n) and Hessian
    (..., n, n); when absent, finite differences are used where derivatives
    are needed.
    """

    fn: Callable
    alpha1: float
    alpha2: float
    dim: int = 1
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    label: str = "alpha"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"alpha dimension must be 1 or 2, got {self.dim}")
        if not (0.0 < self.alpha1 <= self.alpha2 < 2.0):
            raise DomainError(
                f"alpha range must satisfy 0 < alpha1 <= alpha2 < 2, got ({self.alpha1}, {self.alpha2})"
            )

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.alpha1 == self.alpha2

    @staticmethod
    def constant(value: float, dim: int = 1) -> "AlphaFunction":
        v = float(value)

        def fn(x):
            return np.full(np.asarray(x).shape[:-1], v)

        def d1(x):
            return np.zeros(np.asarray(x).shape)

        def d2(x):
            shape = np.asarray(x).shape
            return np.zeros(shape + (shape[-1],))

        return AlphaFunction(fn, v, v, dim=dim, d1=d1, d2=d2, label=f"alpha={v}")

    def grad(self, x, h: float = 1e-4):
        x = np.asarray(x, dtype=float)
        if self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float)
        out = np.empty(x.shape)
        for axis in range(self.dim):
            e = np.zeros(self.dim)
            e[axis] = 1.0
            out[..., axis] = (self(x + h * e) - self(x - h * e)) / (2.0 * h)
        return out

    def hess(self, x, h: float = 1e-4):
        x = np.asarray(x, dtype=float)
        if self.d2 is not None:
            return np.asarray(self.d2(x), dtype=float)
        n = self.dim
        out = np.empty(x.shape + (n,))
        f0 = self(x)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = 1.0
            out[..., i, i] = (self(x + h * ei) - 2.0 * f0 + self(x - h * ei)) / h**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = 1.0
                mixed = (
                    self(x + h * ei + h * ej)
                    - self(x + h * ei - h * ej)
                    - self(x - h * ei + h * ej)
                    + self(x - h * ei - h * ej)
                ) / (4.0 * h**2)
                out[..., i, j] = mixed
                out[..., j, i] = mixed
        return out


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpKernel:
    """Nonnegative jump kernel k(x, y); ``eval`` broadcasts over (..., n) pairs.

    Optional metadata sharpens far-field handling:

    * ``alpha_fn`` marks the stable-like family (exact power-law tails at
      fixed base point);
    * ``z_support`` promises k(x, y) = 0 whenever |x - y| > z_support;
    * ``tail_amplitude``/``tail_exponent`` promise
      k(x, y) <= tail_amplitude * |x - y|^(-n - tail_exponent) for |x - y| >= 1.
    """

    dim: int
    eval: Callable
    symmetric_hint: bool = False
    label: str = "kernel"
    alpha_fn: Optional[AlphaFunction] = None
    z_support: Optional[float] = None
    tail_exponent: Optional[float] = None
    tail_amplitude: Optional[float] = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"kernel dimension must be 1 or 2, got {self.dim}")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(self.eval(x, y), dtype=float)
        if np.any(v < 0.0):
            bad = np.argwhere(v < 0.0)
            idx = tuple(bad[0])
            raise NegativeKernel(
                f"kernel {self.label!r} is negative at a sampled pair (value {v[idx]!r})"
            )
        return v


def transpose(k: JumpKernel) -> JumpKernel:
    """The kernel (x, y) -> k(y, x). Pointwise tail bounds carry over."""
    return JumpKernel(
        dim=k.dim,
        eval=lambda x, y: k.eval(y, x),
        symmetric_hint=k.symmetric_hint,
        label=k.label + "^T",
        alpha_fn=None,
        z_support=k.z_support,
        tail_exponent=k.tail_exponent,
        tail_amplitude=k.tail_amplitude,
    )


@dataclass(frozen=True)
class SplitKernel:
    """A kernel together with closures for its symmetric/antisymmetric parts."""

    base: JumpKernel
    k_s: Callable
    k_a: Callable

    @property
    def dim(self) -> int:
        return self.base.dim

    def both(self, x, y):
        """(k_s, k_a) from two base evaluations."""
        a = self.base(x, y)
        b = self.base(y, x)
        return 0.5 * (a + b), 0.5 * (a - b)

    @staticmethod
    def from_parts(
        dim: int,
        ks_fn: Callable,
        ka_fn: Callable,
        *,
        label: str = "kernel",
        z_support: Optional[float] = None,
        tail_exponent: Optional[float] = None,
        tail_amplitude: Optional[float] = None,
    ) -> "SplitKernel":
        """Build a kernel directly from closures for k_s and k_a.

        The base kernel is k_s + k_a; nonnegativity (equivalently
        |k_a| <= k_s) is checked on every evaluation through the base.
        """

        base = JumpKernel(
            dim=dim,
            eval=lambda x, y: np.asarray(ks_fn(x, y), dtype=float) + np.asarray(ka_fn(x, y), dtype=float),
            symmetric_hint=False,
            label=label,
            z_support=z_support,
            tail_exponent=tail_exponent,
            tail_amplitude=tail_amplitude,
        )
        return SplitKernel(base=base, k_s=ks_fn, k_a=ka_fn)


def split(k: JumpKernel) -> SplitKernel:
    """Symmetric/antisymmetric decomposition of a kernel.

    For kernels flagged ``symmetric_hint`` the antisymmetric closure returns
    exact zeros, so downstream antisymmetric quantities vanish identically
    rather than to rounding.
    """

    if k.symmetric_hint:

        def ks(x, y):
            return k(x, y)

        def ka(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            return np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))

    else:

        def ks(x, y):
            return 0.5 * (k(x, y) + k(y, x))

        def ka(x, y):
            return 0.5 * (k(x, y) - k(y, x))

    return SplitKernel(base=k, k_s=ks, k_a=ka)


# ---------------------------------------------------------------------------
# the stable-like family
# ---------------------------------------------------------------------------


def weight_w(alpha, n: int = 1):
    """Weight of the stable-like kernel of order alpha in dimension n.

    w(alpha) = alpha * 2^(alpha-1) * Gamma((alpha+n)/2) / (pi^(n/2) * Gamma(1-alpha/2)).

    With this normalisation the operator built from w(alpha)|z|^(-n-alpha)
    acts on e_xi with multiplier -|xi|^alpha.  Accepts scalars or arrays with
    entries in (0, 2).
    """
    a = np.asarray(alpha, dtype=float)
    if np.any((a <= 0.0) | (a >= 2.0)):
        raise DomainError("weight_w requires alpha in (0, 2)")
    if n not in (1, 2):
        raise DomainError("weight_w supports n in {1, 2}")
    val = a * 2.0 ** (a - 1.0) * gamma((a + n) / 2.0) / (np.pi ** (n / 2.0) * gamma(1.0 - a / 2.0))
    return float(val) if np.ndim(alpha) == 0 else val


def stable_like_kernel(af: AlphaFunction, n: Optional[int] = None) -> JumpKernel:
    """k(x, y) = w(alpha(x)) |x - y|^(-n - alpha(x)).

    Evaluation at coincident points raises DomainError.  The returned kernel
    carries the alpha function, enabling exact power-law tails and the
    small-|z| closed forms used by the quadrature engines.
    """
    n = af.dim if n is None else int(n)
    if n != af.dim:
        raise DomainError(f"kernel dimension {n} != alpha dimension {af.dim}")

    def eval_(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = x - y
        r = np.sqrt(np.sum(d * d, axis=-1))
        if np.any(r == 0.0):
            raise DomainError("stable-like kernel evaluated on the diagonal x == y")
        a = af(np.broadcast_to(x, np.broadcast_shapes(x.shape, y.shape)))
        w = weight_w(a, n)
        return w * r ** (-(n + a))

    if af.is_constant:
        w_max = weight_w(af.alpha1, n)
    else:
        grid = np.linspace(af.alpha1, af.alpha2, 2001)
        w_max = float(np.max(weight_w(grid, n))) * (1.0 + 1e-9)

    return JumpKernel(
        dim=n,
        eval=eval_,
        symmetric_hint=af.is_constant,
        label=f"stable({af.label}, n={n})",
        alpha_fn=af,
        z_support=None,
        tail_exponent=af.alpha1,
        tail_amplitude=w_max,
    )


# ---------------------------------------------------------------------------
# modulus of continuity of alpha
# ---------------------------------------------------------------------------

_PROFILE_CACHE: dict = {}


def beta_profile(af: AlphaFunction, domain: Box, spacing: Optional[float] = None):
    """Sampled modulus profile of alpha over a box.

    Returns (distances, values): strictly increasing pair separations d_j and
    the cumulative maxima beta(d_j) = max over lattice pairs at separation
    <= d_j of |alpha(x) - alpha(y)|.  The lattice is anchored at the absolute
    origin with fixed spacing, so enlarging either the query radius or the
    domain can only grow the result (monotonicity by construction).
    """
    if domain.dim != af.dim:
        raise DomainError("beta domain dimension does not match alpha")
    if spacing is None:
        spacing = 2.0**-10 if af.dim == 1 else 1.0 / 32.0
    if spacing <= 0:
        raise DomainError("spacing must be positive")

    key = (id(af), domain.lo, domain.hi, float(spacing))
    hit = _PROFILE_CACHE.get(key)
    if hit is not None:
        return hit

    h0 = float(spacing)
    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    start = np.ceil(lo / h0 - 1e-12) * h0
    counts = np.floor((hi - start) / h0 + 1e-12).astype(int) + 1
    if np.any(counts < 2):
        raise DomainError("domain too small for the requested beta spacing")

    if af.dim == 1:
        xs = (start[0] + h0 * np.arange(counts[0]))[:, None]
        a = af(xs)
        jmax = counts[0] - 1
        dists = h0 * np.arange(1, jmax + 1)
        maxima = np.empty(jmax)
        for j in range(1, jmax + 1):
            maxima[j - 1] = np.max(np.abs(a[j:] - a[:-j]))
    else:
        ax0 = start[0] + h0 * np.arange(counts[0])
        ax1 = start[1] + h0 * np.arange(counts[1])
        g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
        pts = np.stack([g0, g1], axis=-1)
        a = af(pts)
        jm0, jm1 = counts[0] - 1, counts[1] - 1
        offsets = []
        for j0 in range(0, jm0 + 1):
            for j1 in range(-jm1, jm1 + 1):
                if j0 == 0 and j1 <= 0:
                    continue
                offsets.append((j0, j1, h0 * np.hypot(j0, j1)))
        offsets.sort(key=lambda t: (t[2], t[0], t[1]))
        dist_list = []
        max_list = []
        for j0, j1, d in offsets:
            s0 = a[j0:, :] if j0 else a
            t0 = a[: a.shape[0] - j0, :] if j0 else a
            if j1 >= 0:
                m = np.max(np.abs(s0[:, j1:] - t0[:, : t0.shape[1] - j1])) if j1 else np.max(np.abs(s0 - t0))
            else:
                jj = -j1
                m = np.max(np.abs(s0[:, : s0.shape[1] - jj] - t0[:, jj:]))
            dist_list.append(d)
            max_list.append(m)
        dists = np.asarray(dist_list)
        maxima = np.asarray(max_list)
        # merge duplicate separations
        uniq, inv = np.unique(np.round(dists / (h0 * 1e-9)).astype(np.int64), return_inverse=True)
        merged = np.zeros(uniq.shape[0])
        np.maximum.at(merged, inv, maxima)
        dists = uniq * (h0 * 1e-9)
        maxima = merged

    values = np.maximum.accumulate(maxima)
    result = (dists, values)
    if len(_PROFILE_CACHE) > 32:
        _PROFILE_CACHE.clear()
    _PROFILE_CACHE[key] = result
    return result


def beta_modulus(af: AlphaFunction, r, domain: Box, spacing: Optional[float] = None):
    """Sampled modulus of continuity beta(r) = sup over |x-y| <= r of |alpha(x)-alpha(y)|.

    Returns a float for scalar r, an array for array r.  The estimate is a
    lower bound on the true supremum (it only sees lattice pairs) but is
    monotone in r and in domain inclusion, and exact up to the lattice
    quantisation for Lipschitz alpha.
    """
    dists, values = beta_profile(af, domain, spacing)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0):
        raise DomainError("beta_modulus requires r >= 0")
    idx = np.searchsorted(dists, r_arr * (1 + 1e-12), side="right") - 1
    out = np.where(idx >= 0, values[np.clip(idx, 0, len(values) - 1)], 0.0)
    return float(out[0]) if np.ndim(r) == 0 else out
