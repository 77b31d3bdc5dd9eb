"""Closed-form input signals with analytic derivatives.

The derivative-producing block of a descriptor system turns input
derivatives into state components, so simulation needs exact derivatives of
arbitrary order.  Signals are stored symbolically (sympy) and compiled to
vectorized numpy callables on demand.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

_T = sp.Symbol("t", real=True)


class InputSignal:
    """Vector-valued smooth signal u(t) with derivatives of every order."""

    def __init__(self, exprs):
        exprs = tuple(sp.sympify(e) for e in exprs)
        for e in exprs:
            extra = e.free_symbols - {_T}
            if extra:
                raise ValueError(f"signal may only depend on t, found {extra}")
        self.exprs = exprs
        self._fns: dict[int, list] = {}

    @property
    def dim(self) -> int:
        return len(self.exprs)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "InputSignal":
        return cls([sp.Integer(0)] * dim)

    @classmethod
    def polynomial(cls, coefficients) -> "InputSignal":
        """coefficients[i] = ascending coefficients of component i."""
        exprs = []
        for comp in coefficients:
            exprs.append(sum((sp.Float(c) * _T ** k for k, c in enumerate(comp)),
                             sp.Integer(0)))
        return cls(exprs)

    @classmethod
    def sinusoid(cls, amplitudes, frequency: float, phase: float = 0.0) -> "InputSignal":
        return cls([sp.Float(a) * sp.sin(sp.Float(frequency) * _T + sp.Float(phase))
                    for a in np.atleast_1d(amplitudes)])

    @classmethod
    def probe(cls, s: int, dim: int, component: int = 0,
              shift: float = 1.0) -> "InputSignal":
        """Decaying chirp sin((t+shift)^2) / (t+shift)^s in one component.

        Derivatives up to order s-1 decay while the s-th does not, which is
        exactly the input that defeats any estimator for a functional that
        depends on the s-th input derivative.  The time shift keeps the
        signal smooth at t = 0.
        """
        if not 0 <= component < dim:
            raise ValueError("component out of range")
        ts = _T + sp.Float(shift)
        expr = sp.sin(ts ** 2) / ts ** int(s)
        return cls([expr if i == component else sp.Integer(0)
                    for i in range(dim)])

    def __add__(self, other: "InputSignal") -> "InputSignal":
        if self.dim != other.dim:
            raise ValueError("signal dimensions differ")
        return InputSignal([a + b for a, b in zip(self.exprs, other.exprs)])

    def scale(self, factor: float) -> "InputSignal":
        return InputSignal([sp.Float(factor) * e for e in self.exprs])

    # -- evaluation ---------------------------------------------------------

    def _compiled(self, order: int):
        if order not in self._fns:
            fns = []
            for e in self.exprs:
                de = sp.diff(e, _T, order) if order else e
                fns.append(sp.lambdify(_T, de, modules="numpy"))
            self._fns[order] = fns
        return self._fns[order]

    def eval(self, t, order: int = 0) -> np.ndarray:
        """Value of the order-th derivative at scalar or array times t.

        Returns shape (dim,) for scalar t, (dim, len(t)) for arrays.
        """
        t = np.asarray(t, dtype=float)
        fns = self._compiled(order)
        rows = [np.broadcast_to(np.asarray(f(t), dtype=float), t.shape).copy()
                for f in fns] if t.ndim else [float(f(t)) for f in fns]
        return np.array(rows).reshape((self.dim,) + t.shape)

    def __call__(self, t) -> np.ndarray:
        return self.eval(t, 0)

    def derivative(self, order: int = 1) -> "InputSignal":
        return InputSignal([sp.diff(e, _T, order) for e in self.exprs])

    def __repr__(self):
        return f"InputSignal({list(self.exprs)!r})"
