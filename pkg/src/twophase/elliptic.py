"""Uniformly elliptic operators on symmetric matrices and discrete Hessians.

The problem class constrains the operator only through two-sided increment
bounds on positive-semidefinite perturbations.  We ship the Pucci extremal
operators as the canonical members (they bound the class and make the
membership testable), the laplacian, and a callback escape hatch for user
operators.  Eigenvalues are computed by a deterministic cyclic Jacobi
iteration (see _kernels) so results do not depend on LAPACK builds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError, InputError, OperatorError, StencilError
from .grid import ScalarField

OPERATOR_KINDS = ("laplace", "pucci_max", "pucci_min", "callback")

_KIND_CODES = {
    "laplace": _kernels.OP_LAPLACE,
    "pucci_max": _kernels.OP_PUCCI_MAX,
    "pucci_min": _kernels.OP_PUCCI_MIN,
}


@dataclass(frozen=True)
class OperatorSpec:
    """A uniformly elliptic operator with ellipticity constants (lam, Lam).

    Built-in kinds are positively 1-homogeneous and vanish on the zero
    matrix.  A callback must map symmetric n x n arrays to finite floats and
    be safe for concurrent invocation; nothing is assumed about it beyond
    what check_ellipticity samples.
    """

    kind: str
    lam: float = 1.0
    Lam: float = 1.0
    callback: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ConfigurationError(f"unknown operator kind {self.kind!r}")
        if not (0 < self.lam <= self.Lam):
            raise ConfigurationError(
                f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")
        if (self.kind == "callback") != (self.callback is not None):
            raise ConfigurationError("callback operators need a callback, "
                                     "built-in kinds must not carry one")

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]


def _check_symmetric(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InputError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.T)) > 1e-12 * scale:
        raise InputError("matrix is not symmetric")
    return H


def evaluate(op: OperatorSpec, H: np.ndarray) -> float:
    """F(H): trace for laplace, Pucci combination of the eigenvalues for the
    extremal kinds, user value for callbacks."""
    H = _check_symmetric(H)
    if op.kind == "callback":
        val = float(op.callback(H))
        if not np.isfinite(val):
            raise OperatorError(f"callback returned non-finite value {val}")
        return val
    return float(_kernels.op_eval_builtin(op.code, op.lam, op.Lam, H))


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    worst_ratio_low: float
    worst_ratio_high: float
    samples: int


def check_ellipticity(op: OperatorSpec, n: int, sample_count: int = 1000,
                      seed: int = 0) -> EllipticityReport:
    """Sample pairs (M, N) with N >= 0 of unit operator norm and test the
    extremal increment bounds lam*tr(N) <= F(M+N) - F(M) <= Lam*tr(N).

    The trace form is the standard characterization through the Pucci
    operators; with it both the laplacian (lam = Lam = 1) and the extremal
    operators pass with their own constants.  Reported ratios are the raw
    increments over the unit operator norm, so for the laplacian they fall in
    [1, n].  Sampling can refute, never certify: a pathological callback may
    pass on every tested pair.
    """
    if sample_count < 1:
        raise InputError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    tol = 1e-9
    lo = np.inf
    hi = -np.inf
    ok = True
    for _ in range(sample_count):
        B = rng.normal(size=(n, n))
        M = (B + B.T) * (0.5 * 10.0 ** rng.uniform(-1.0, 2.0))
        d = rng.uniform(0.0, 1.0, size=n)
        d[int(rng.integers(n))] = 1.0          # unit operator norm after rotation
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        N = (Q * d) @ Q.T
        N = 0.5 * (N + N.T)
        inc = evaluate(op, M + N) - evaluate(op, M)
        tr = float(np.sum(d))
        scale = max(1.0, abs(inc), op.Lam * tr)
        if inc < op.lam * tr - tol * scale or inc > op.Lam * tr + tol * scale:
            ok = False
        lo = min(lo, inc)
        hi = max(hi, inc)
    return EllipticityReport(passed=ok, worst_ratio_low=float(lo),
                             worst_ratio_high=float(hi), samples=sample_count)


def discrete_hessian(field: ScalarField, node: int) -> np.ndarray:
    """Second-order central-difference Hessian at an interior-core node.

    Diagonal entries use the standard three-point stencil, off-diagonal
    entries the symmetric four-point cross, so the result is exactly
    symmetric and reproduces quadratic polynomials to roundoff.  Raises
    StencilError if any stencil point leaves the ball.
    """
    g = field.grid
    v = field.values
    z = g.coords[node]
    h2 = g.h * g.h
    H = np.empty((g.n, g.n))
    nbr = g.neighbor_table()
    for a in range(g.n):
        jm, jp = int(nbr[node, a, 0]), int(nbr[node, a, 1])
        if jm < 0 or jp < 0:
            raise StencilError(f"node {node}: axis stencil leaves the ball "
                               f"(restrict to the interior core)")
        H[a, a] = (v[jp] - 2.0 * v[node] + v[jm]) / h2
    for a in range(g.n):
        for b in range(a + 1, g.n):
            s = 0.0
            for sa in (-1, 1):
                for sb in (-1, 1):
                    zz = z.copy().astype(np.int64)
                    zz[a] += sa
                    zz[b] += sb
                    idx = g.index_of(zz)
                    if idx < 0:
                        raise StencilError(f"node {node}: cross stencil leaves "
                                           f"the ball (restrict to the interior core)")
                    s += sa * sb * v[idx]
            H[a, b] = H[b, a] = s / (4.0 * h2)
    return H


def core_mask(grid) -> np.ndarray:
    """Nodes whose full cross stencil (axis + diagonal pairs) stays in the ball."""
    z = grid.coords.astype(np.int64)
    rr = np.sum(z ** 2, axis=1)
    K2 = grid.K * grid.K
    ok = grid.interior.copy()
    for a in range(grid.n):
        for b in range(a + 1, grid.n):
            for sa in (-1, 1):
                for sb in (-1, 1):
                    ok &= (rr + 2 * sa * z[:, a] + 2 * sb * z[:, b] + 2) <= K2
    return ok
