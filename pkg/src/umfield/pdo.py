"""Sup-type pseudodifferential operators on ball-trees.

The operator acts on leaf functions as

    (Tf)(x) = sum_y T(sup(x, y)) (f(x) - f(y)) measure(y)

where the symbol T is a nonnegative function on interior vertices.  The
operator is diagonal on the tree wavelets; the eigenvalue attached to vertex
I is the path sum

    lambda_I = T(I) nu(I) + sum over strict ancestors J of
               T(J) (nu(J) - nu(child of J toward I))

computed here by the equivalent O(n) top-down recurrence

    lambda_child = lambda_parent + nu(child) (T(child) - T(parent)).

The dense O(n^2) application is kept as the reference oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tree import BallTree, OutOfRange
from .wavelets import WaveletBasis


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Symbol:
    """Nonnegative symbol values on interior vertices."""
    values: dict[int, float]

    def __post_init__(self):
        for v, t in self.values.items():
            if not (t >= 0.0) or not math.isfinite(t):
                raise ValueError(f"symbol value at vertex {v} must be nonnegative, got {t}")


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue per interior vertex."""
    lam: dict[int, float]


def _check_symbol(t: BallTree, s: Symbol) -> None:
    for v in s.values:
        if t.is_leaf(v):
            raise ValueError(f"symbol defined on leaf {t.names[v]!r}")
    missing = [v for v in t.interior if v not in s.values]
    if missing:
        raise ValueError(f"symbol missing on interior vertices {missing}")


def symbol_from_tree(t: BallTree) -> Symbol:
    """Symbol read off the "T" entries of the tree document."""
    if t.symbol_hint is None:
        raise ValueError("tree document carries no symbol values")
    s = Symbol(dict(t.symbol_hint))
    _check_symbol(t, s)
    return s


def constant_symbol(t: BallTree, c: float) -> Symbol:
    return Symbol({v: c for v in t.interior})


def random_symbol(t: BallTree, seed, low: float = 0.0, high: float = 2.0) -> Symbol:
    rng = np.random.default_rng(seed)
    return Symbol({v: float(rng.uniform(low, high)) for v in t.interior})


def _symbol_sup_matrix(t: BallTree, s: Symbol) -> np.ndarray:
    """T(sup(x, y)) over leaf pairs; zero on the diagonal (sup is a leaf there)."""
    tvals = np.zeros(t.n_vertices)
    for v, val in s.values.items():
        tvals[v] = val
    TS = tvals[t.sup_index_matrix()]
    np.fill_diagonal(TS, 0.0)
    return TS


def apply_dense(t: BallTree, s: Symbol, f) -> np.ndarray:
    """O(n^2) reference application of the operator to a leaf-value vector."""
    _check_symbol(t, s)
    f = np.asarray(f, dtype=float)
    if f.shape != (t.n_leaves,):
        raise DimensionMismatch(f"expected vector of length {t.n_leaves}, got shape {f.shape}")
    TS = _symbol_sup_matrix(t, s)
    nu = t.leaf_measures
    return f * (TS @ nu) - TS @ (f * nu)


def dense_operator_matrix(t: BallTree, s: Symbol) -> np.ndarray:
    """Matrix M with (Tf) = M f in the standard leaf basis."""
    _check_symbol(t, s)
    TS = _symbol_sup_matrix(t, s)
    nu = t.leaf_measures
    return np.diag(TS @ nu) - TS * nu


def spectrum(t: BallTree, s: Symbol) -> Spectrum:
    """Eigenvalues for all interior vertices via the top-down recurrence."""
    _check_symbol(t, s)
    lam: dict[int, float] = {}
    for I in t.interior:  # preorder: parent precedes child
        if I == t.root:
            lam[I] = s.values[I] * t.measure[I]
        else:
            p = t.parent[I]
            lam[I] = lam[p] + t.measure[I] * (s.values[I] - s.values[p])
    return Spectrum(lam)


def eigenvalue_path_sum(t: BallTree, s: Symbol, I: int) -> float:
    """Direct path-sum form of the eigenvalue; reference for spectrum()."""
    if t.is_leaf(I):
        raise ValueError(f"vertex {t.names[I]!r} is a leaf")
    terms = [s.values[I] * t.measure[I]]
    J = t.parent[I]
    below = I
    while J != -1:
        terms.append(s.values[J] * (t.measure[J] - t.measure[below]))
        below = J
        J = t.parent[J]
    return math.fsum(terms)


def verify_eigen(t: BallTree, s: Symbol, b: WaveletBasis) -> float:
    """Max scaled residual of the eigenrelation over all wavelets plus the constant.

    Residual per wavelet: max|T psi - lambda psi| / max(1, lambda); the
    constant function must map to (numerically) zero.
    """
    _check_symbol(t, s)
    sp = spectrum(t, s)
    TS = _symbol_sup_matrix(t, s)
    nu = t.leaf_measures
    row = TS @ nu
    W = b.wavelet_leaf_matrix()
    TW = W * row - (W * nu) @ TS  # TS symmetric
    lam = np.array([sp.lam[w.vertex] for w in b.wavelets])
    resid = np.abs(TW - lam[:, None] * W).max(axis=1) / np.maximum(1.0, lam)
    const = np.full(t.n_leaves, b.constant_value)
    const_resid = np.abs(const * row - TS @ (const * nu)).max()
    return float(max(resid.max(initial=0.0), const_resid))


@dataclass(frozen=True)
class SeriesVerdict:
    converges: bool
    ratio: float                # asymptotic term ratio (inf if terms blow up)
    value: float | None = None  # partial sum + geometric tail, when convergent


@dataclass(frozen=True)
class ConvergenceReport:
    branching: int
    measure_ratio: float
    symbol_ratio: float
    levels_probe: int
    conv1: SeriesVerdict
    conv2: SeriesVerdict


def convergence_report(p: int, measure_ratio: float, symbol_ratio: float,
                       levels_probe: int = 40) -> ConvergenceReport:
    """Convergence diagnostics for the level-homogeneous geometric family.

    Models an infinite tree where, walking upward from a reference vertex at
    level 0 with measure 1 and symbol value 1, the ball measure grows by the
    factor mu = measure_ratio per level and the symbol scales by
    q = symbol_ratio per level.

    conv1 is the eigenvalue series sum_{l>=1} T_l (nu_l - nu_{l-1}); its term
    ratio is q mu, so it converges iff q mu < 1.  conv2 is the covariance
    series sum_{l>=1} lambda_l^{-2} (1/nu_{l-1} - 1/nu_l); when conv1
    converges and q > 0 its term ratio is 1 / (q^2 mu^3).  Values are partial
    sums over levels_probe levels plus the exact geometric tail.
    """
    mu, q = measure_ratio, symbol_ratio
    if p < 2 or not mu > 1.0 or not q >= 0.0 or levels_probe < 2:
        raise OutOfRange(f"need p >= 2, measure_ratio > 1, symbol_ratio >= 0, "
                         f"levels_probe >= 2; got ({p}, {mu}, {q}, {levels_probe})")

    # conv1: terms a_l = q^l mu^(l-1) (mu - 1), l >= 1
    r1 = q * mu
    a = [q ** l * mu ** (l - 1) * (mu - 1.0) for l in range(1, levels_probe + 1)]
    if r1 < 1.0:
        conv1 = SeriesVerdict(True, r1, math.fsum(a) + a[-1] * r1 / (1.0 - r1))
    else:
        conv1 = SeriesVerdict(False, r1)

    if not conv1.converges:
        # eigenvalues do not exist; the covariance series is undefined
        conv2 = SeriesVerdict(False, math.inf)
    elif q == 0.0:
        # symbol vanishes above the reference level, so every lambda_l with
        # l >= 1 is zero and the inverse-square terms are infinite
        conv2 = SeriesVerdict(False, math.inf)
    else:
        # exact eigenvalue at level l: lambda_l = (q mu)^l (1 + (1-1/mu) q mu / (1-q mu))
        c = 1.0 + (1.0 - 1.0 / mu) * r1 / (1.0 - r1)
        b = [(c * r1 ** l) ** -2 * mu ** -l * (mu - 1.0)
             for l in range(1, levels_probe + 1)]
        r2 = 1.0 / (q * q * mu ** 3)
        if r2 < 1.0:
            conv2 = SeriesVerdict(True, r2, math.fsum(b) + b[-1] * r2 / (1.0 - r2))
        else:
            conv2 = SeriesVerdict(False, r2)

    return ConvergenceReport(p, mu, q, levels_probe, conv1, conv2)
