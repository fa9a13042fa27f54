"""Piecewise polynomials in one variable with exact integration.

Each piece ``k`` stores its coefficients in the local power basis
``p_k(x) = sum_j c[k, j] * (x - x_k)**j`` on ``[x_k, x_{k+1}]``. Local
coordinates keep thin pieces (layers of width 1e-8) well conditioned.
"""

from __future__ import annotations

from math import comb

import numpy as np


class PiecewisePolynomial:
    """Right-continuous piecewise polynomial on ``[x_0, x_K]``.

    Parameters
    ----------
    breakpoints : array_like, shape (K+1,)
        Strictly increasing piece boundaries.
    coeffs : array_like, shape (K, D+1)
        Local power-basis coefficients per piece.
    """

    def __init__(self, breakpoints, coeffs):
        bp = np.asarray([float(x) for x in breakpoints], dtype=float)
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if c.shape[0] != bp.size - 1:
            raise ValueError(f"{bp.size - 1} pieces but {c.shape[0]} coefficient rows")
        self.breakpoints = bp
        self.coeffs = c

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant_pieces(cls, breakpoints, values):
        return cls(breakpoints, np.asarray(values, dtype=float).reshape(-1, 1))

    @classmethod
    def from_callable_poly(cls, poly, a, b):
        """Wrap a ``numpy.polynomial.Polynomial`` as a single piece on [a, b]."""
        g = np.asarray(poly.coef, dtype=float)
        a0 = float(a)
        coef = [sum(comb(j, m) * g[j] * a0 ** (j - m) for j in range(m, g.size))
                for m in range(g.size)]
        return cls([a, b], [coef])

    @classmethod
    def zero(cls, a, b):
        return cls([a, b], [[0.0]])

    # -- basic queries ------------------------------------------------------
    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @property
    def n_pieces(self):
        return self.coeffs.shape[0]

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def piece_index(self, x, side="right"):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side=side) - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def __call__(self, x, side="right"):
        """Evaluate; ``side`` picks the one-sided limit at breakpoints."""
        x = np.asarray(x, dtype=float)
        k = self.piece_index(x, side)
        t = x - self.breakpoints[k]
        c = self.coeffs[k]
        out = np.zeros_like(t)
        for j in range(self.degree, -1, -1):
            out = out * t + c[..., j]
        return out

    def jumps(self):
        """Values ``p(x_k+) - p(x_k-)`` at the interior breakpoints."""
        inner = self.breakpoints[1:-1]
        return inner, self(inner, "right") - self(inner, "left")

    # -- algebra ----------------------------------------------------------------
    def _pad(self, degree):
        if degree <= self.degree:
            return self.coeffs
        extra = np.zeros((self.n_pieces, degree - self.degree))
        return np.hstack([self.coeffs, extra])

    def refine(self, points):
        """Same function re-expressed on ``breakpoints ∪ points``."""
        pts = np.asarray([float(p) for p in points], dtype=float)
        a, b = self.domain
        pts = pts[(pts > a) & (pts < b)]
        new_bp = np.union1d(self.breakpoints, pts)
        if new_bp.size == self.breakpoints.size:
            return self
        k = self.piece_index(new_bp[:-1], "right")
        delta = new_bp[:-1] - self.breakpoints[k]
        old = self.coeffs[k]
        deg = self.degree
        new = np.zeros_like(old)
        # Taylor shift of each local polynomial to its new origin
        for m in range(deg + 1):
            for j in range(m, deg + 1):
                new[:, m] += comb(j, m) * old[:, j] * delta ** (j - m)
        return PiecewisePolynomial(new_bp, new)

    def _aligned(self, other):
        a = self.refine(other.breakpoints)
        b = other.refine(a.breakpoints)
        a = a.refine(b.breakpoints)
        deg = max(a.degree, b.degree)
        return a.breakpoints, a._pad(deg), b._pad(deg)

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coeffs.copy()
            c[:, 0] += other
            return PiecewisePolynomial(self.breakpoints, c)
        bp, ca, cb = self._aligned(other)
        return PiecewisePolynomial(bp, ca + cb)

    __radd__ = __add__

    def __neg__(self):
        return PiecewisePolynomial(self.breakpoints, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return PiecewisePolynomial(self.breakpoints, self.coeffs * other)
        bp, ca, cb = self._aligned(other)
        prod = np.zeros((ca.shape[0], ca.shape[1] + cb.shape[1] - 1))
        for i in range(ca.shape[1]):
            for j in range(cb.shape[1]):
                prod[:, i + j] += ca[:, i] * cb[:, j]
        return PiecewisePolynomial(bp, prod)

    __rmul__ = __mul__

    def derivative(self):
        if self.degree == 0:
            return PiecewisePolynomial(self.breakpoints, np.zeros((self.n_pieces, 1)))
        j = np.arange(1, self.degree + 1)
        return PiecewisePolynomial(self.breakpoints, self.coeffs[:, 1:] * j)

    def antiderivative(self):
        """Continuous primitive vanishing at the left end of the domain."""
        j = np.arange(1, self.degree + 2)
        c = np.zeros((self.n_pieces, self.degree + 2))
        c[:, 1:] = self.coeffs / j
        h = np.diff(self.breakpoints)
        piece_int = np.array([np.polyval(c[k, ::-1], h[k]) for k in range(self.n_pieces)])
        c[:, 0] = np.concatenate([[0.0], np.cumsum(piece_int)[:-1]])
        return PiecewisePolynomial(self.breakpoints, c)

    # -- integration --------------------------------------------------------------
    def integral(self, a=None, b=None):
        """Exact integral over ``[a, b]`` (defaults to the whole domain)."""
        lo, hi = self.domain
        a = lo if a is None else float(a)
        b = hi if b is None else float(b)
        if b < a:
            return -self.integral(b, a)
        if a == b:
            return 0.0
        cut = self.refine([a, b])
        total = 0.0
        h = np.diff(cut.breakpoints)
        mid = 0.5 * (cut.breakpoints[:-1] + cut.breakpoints[1:])
        inside = (mid > a) & (mid < b)
        j = np.arange(1, cut.degree + 2)
        for k in np.flatnonzero(inside):
            total += float(np.sum(cut.coeffs[k] * h[k] ** j / j))
        return total

    def norm(self, p=1, exclude=()):
        """Exact ``L^p`` norm for ``p`` in {1, 2}, or the sup norm for ``p=inf``.

        ``exclude`` is a sequence of ``(lo, hi)`` intervals left out of the
        computation (collars around layers or atoms).
        """
        f = self.refine([x for iv in exclude for x in iv])
        h = np.diff(f.breakpoints)
        mid = 0.5 * (f.breakpoints[:-1] + f.breakpoints[1:])
        keep = np.ones(f.n_pieces, dtype=bool)
        for lo, hi in exclude:
            keep &= ~((mid > lo) & (mid < hi))
        if p == 2:
            sq = f * f
            j = np.arange(1, sq.degree + 2)
            val = sum(float(np.sum(sq.coeffs[k] * h[k] ** j / j)) for k in np.flatnonzero(keep))
            return float(np.sqrt(max(val, 0.0)))
        if p == 1:
            return sum(_abs_integral(f.coeffs[k], h[k]) for k in np.flatnonzero(keep))
        if p == np.inf:
            return max((_abs_max(f.coeffs[k], h[k]) for k in np.flatnonzero(keep)), default=0.0)
        raise ValueError(f"unsupported norm order {p!r}")


def _local_roots(c, h):
    """Real roots of the local polynomial strictly inside (0, h)."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if c.size <= 1:
        return np.empty(0)
    r = np.roots(c[::-1])
    r = r[np.abs(r.imag) <= 1e-12 * max(1.0, h)].real
    return np.sort(r[(r > 0.0) & (r < h)])


def _abs_integral(c, h):
    cuts = np.concatenate([[0.0], _local_roots(c, h), [h]])
    j = np.arange(1, c.size + 1)
    anti = lambda t: float(np.sum(c * t ** j / j))
    return sum(abs(anti(b) - anti(a)) for a, b in zip(cuts[:-1], cuts[1:]))


def _abs_max(c, h):
    dc = c[1:] * np.arange(1, c.size)
    cand = np.concatenate([[0.0, h], _local_roots(dc, h)])
    return float(np.max(np.abs([np.polyval(c[::-1], t) for t in cand])))
