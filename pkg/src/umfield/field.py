"""Gaussian random field obtained by inverting a sup-operator on white noise.

The field is synthesized in wavelet space: independent standard normal
coefficients divided by the eigenvalues.  Its two-point function depends on
a leaf pair only through their sup vertex and has the closed form

    K(S) = -lambda_S^{-2} / nu(S)
           + sum over strict ancestors I of S of
             lambda_I^{-2} (1/nu(child of I toward S) - 1/nu(I))

with the leading term dropped when S is a leaf (leaves carry no wavelets, so
the variance at a point is the pure ancestor sum).  The direct wavelet sum is
kept as the reference oracle.

The operator annihilates constants, so the field is fixed to have zero
weighted mean and the constant component of the noise has no preimage; the
stochastic equation is solved on the orthogonal complement of constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import BallTree
from .wavelets import WaveletBasis, evaluate
from .pdo import Symbol, Spectrum, apply_dense


class ZeroEigenvalue(ValueError):
    """An eigenvalue needed for inversion is zero."""


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class CovarianceKernel:
    """Kernel value per vertex; K(x, y) for leaves is values[sup(x, y)]."""
    tree: BallTree
    values: tuple[float, ...]

    def value(self, S: int) -> float:
        return self.values[S]

    def leaf_matrix(self) -> np.ndarray:
        """Full n_leaves x n_leaves covariance matrix in leaf_order indexing."""
        vals = np.asarray(self.values)
        return vals[self.tree.sup_index_matrix()]

    def max_abs(self) -> float:
        return float(np.abs(np.asarray(self.values)).max())


@dataclass(frozen=True)
class FieldSample:
    values: np.ndarray          # leaf_order indexing
    seed: object
    coeffs: np.ndarray          # wavelet coefficients d / lambda was applied to


@dataclass(frozen=True)
class WhiteNoiseSample:
    values: np.ndarray
    seed: object
    coeffs: np.ndarray          # canonical order: wavelets then constant mode


@dataclass(frozen=True)
class MarkovCheck:
    value: float
    covered: bool               # at least one test function had zero weighted mean


@dataclass(frozen=True)
class EmpiricalCovariance:
    matrix: np.ndarray
    analytic: np.ndarray
    standard_error: np.ndarray
    max_abs_dev: float
    worst_pair: tuple[str, str]
    n_samples: int
    seed: object


def _lambda_vector(sp: Spectrum, basis: WaveletBasis) -> np.ndarray:
    lam = np.array([sp.lam[w.vertex] for w in basis.wavelets])
    if np.any(lam <= 0.0):
        bad = basis.wavelets[int(np.argmin(lam))].vertex
        raise ZeroEigenvalue(
            f"eigenvalue at vertex {basis.tree.names[bad]!r} is not positive")
    return lam


def kernel_value(t: BallTree, sp: Spectrum, S: int) -> float:
    """Closed-form kernel value at vertex S (leaf S gives the point variance)."""
    terms = []
    if not t.is_leaf(S):
        lam = sp.lam[S]
        if lam <= 0.0:
            raise ZeroEigenvalue(f"eigenvalue at vertex {t.names[S]!r} is not positive")
        terms.append(-(lam ** -2) / t.measure[S])
    below = S
    I = t.parent[S]
    while I != -1:
        lam = sp.lam[I]
        if lam <= 0.0:
            raise ZeroEigenvalue(f"eigenvalue at vertex {t.names[I]!r} is not positive")
        terms.append(lam ** -2 * (1.0 / t.measure[below] - 1.0 / t.measure[I]))
        below = I
        I = t.parent[I]
    return math.fsum(terms)


def covariance_kernel(t: BallTree, sp: Spectrum) -> CovarianceKernel:
    return CovarianceKernel(t, tuple(kernel_value(t, sp, S) for S in range(t.n_vertices)))


def kernel_bruteforce(t: BallTree, sp: Spectrum, basis: WaveletBasis,
                      x: int, y: int) -> float:
    """Reference oracle: direct sum over all wavelets, constant mode excluded."""
    _lambda_vector(sp, basis)
    return math.fsum(sp.lam[w.vertex] ** -2 * evaluate(basis, w, x) * evaluate(basis, w, y)
                     for w in basis.wavelets)


def sample_field(t: BallTree, sp: Spectrum, basis: WaveletBasis, seed) -> FieldSample:
    """One field realization; coefficients are drawn in canonical basis order."""
    lam = _lambda_vector(sp, basis)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(len(basis.wavelets))
    psi = (d / lam) @ basis.wavelet_leaf_matrix()
    return FieldSample(psi, seed, d)


def sample_white_noise(t: BallTree, basis: WaveletBasis, seed) -> WhiteNoiseSample:
    """White noise: i.i.d. standard normal coefficients on the FULL basis."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(len(basis.wavelets) + 1)
    phi = d[:-1] @ basis.wavelet_leaf_matrix() + d[-1] * basis.constant_value
    return WhiteNoiseSample(phi, seed, d)


def check_equation(t: BallTree, s: Symbol, sp: Spectrum, basis: WaveletBasis,
                   seed) -> float:
    """Residual of the stochastic equation on one coefficient draw.

    Builds the field and the wavelet part of the noise from the same
    coefficients and returns max|T psi - phi|; the inversion is exact on the
    zero-mean subspace, so this is pure floating-point error.
    """
    lam = _lambda_vector(sp, basis)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(len(basis.wavelets))
    W = basis.wavelet_leaf_matrix()
    psi = (d / lam) @ W
    phi_w = d @ W
    return float(np.abs(apply_dense(t, s, psi) - phi_w).max())


def bilinear_form(t: BallTree, kernel: CovarianceKernel, f, g) -> float:
    """Double sum f(x) g(y) K(sup(x, y)) nu(x) nu(y) over all leaf pairs.

    Accumulated with exact summation so that analytic cancellations (the
    Markov factorization) survive in floating point.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    nu = t.leaf_measures
    K = kernel.leaf_matrix()
    terms = np.outer(f * nu, g * nu) * K
    return math.fsum(terms.ravel())


def markov_check(t: BallTree, kernel: CovarianceKernel, I: int, J: int,
                 f, g) -> MarkovCheck:
    """Covariance of the field tested against f on ball I and g on ball J.

    Requires disjoint balls and supports inside them.  When at least one of
    f, g has zero weighted mean the value is analytically zero (the kernel is
    constant across the two supports); otherwise the value is returned with
    covered=False.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if t.is_ancestor_or_equal(I, J) or t.is_ancestor_or_equal(J, I):
        raise PreconditionViolated(
            f"balls {t.names[I]!r} and {t.names[J]!r} are not disjoint")
    for name, vec, ball in (("f", f, I), ("g", g, J)):
        lo, hi = t.leaf_span[ball]
        if np.any(vec[:lo] != 0.0) or np.any(vec[hi:] != 0.0):
            raise PreconditionViolated(
                f"{name} is not supported in ball {t.names[ball]!r}")
    nu = t.leaf_measures
    fm = math.fsum(f * nu)
    gm = math.fsum(g * nu)
    fscale = math.fsum(np.abs(f) * nu)
    gscale = math.fsum(np.abs(g) * nu)
    covered = (abs(fm) <= 1e-12 * max(fscale, 1e-300)
               or abs(gm) <= 1e-12 * max(gscale, 1e-300))
    return MarkovCheck(bilinear_form(t, kernel, f, g), covered)


def empirical_covariance(t: BallTree, sp: Spectrum, basis: WaveletBasis,
                         n_samples: int, seed) -> EmpiricalCovariance:
    """Monte Carlo covariance matrix vs the analytic kernel.

    Deterministic given seed: all coefficients come from one generator, each
    sample consuming draws in canonical basis order.  Standard errors follow
    the Gaussian product-moment identity Var(uv) = K_uu K_vv + K_uv^2.
    """
    if n_samples < 2:
        raise ValueError(f"need n_samples >= 2, got {n_samples}")
    lam = _lambda_vector(sp, basis)
    rng = np.random.default_rng(seed)
    W = basis.wavelet_leaf_matrix()
    emp = np.zeros((t.n_leaves, t.n_leaves))
    # draw in batches so huge n_samples does not allocate n x k at once
    batch = max(1, min(n_samples, 2 ** 22 // max(1, len(basis.wavelets))))
    done = 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        D = rng.standard_normal((m, len(basis.wavelets)))
        psi = (D / lam) @ W
        emp += psi.T @ psi
        done += m
    emp /= n_samples

    analytic = covariance_kernel(t, sp).leaf_matrix()
    diag = np.diag(analytic)
    se = np.sqrt((np.outer(diag, diag) + analytic ** 2) / n_samples)
    dev = np.abs(emp - analytic)
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = (t.names[t.leaf_order[i]], t.names[t.leaf_order[j]])
    return EmpiricalCovariance(emp, analytic, se, float(dev[i, j]), worst,
                               n_samples, seed)


def random_markov_instance(t: BallTree, rng) -> tuple[int, int, np.ndarray, np.ndarray] | None:
    """Random compliant (I, J, f, g): disjoint balls, f zero-mean in I, g in J.

    Prefers an interior I so the zero-mean function can be nontrivial.
    Returns None when the tree has a single leaf.
    """
    if t.n_leaves < 2:
        return None
    for _ in range(64):
        x, y = rng.choice(len(t.leaf_order), size=2, replace=False)
        x, y = t.leaf_order[int(x)], t.leaf_order[int(y)]
        V = t.sup(x, y)
        I = t.child_toward(V, x)
        J = t.child_toward(V, y)
        if not t.is_leaf(I):
            break
        if not t.is_leaf(J):
            I, J = J, I
            break
    nu = t.leaf_measures
    f = np.zeros(t.n_leaves)
    lo, hi = t.leaf_span[I]
    f[lo:hi] = rng.standard_normal(hi - lo)
    if hi - lo > 1:
        f[lo:hi] -= math.fsum(f[lo:hi] * nu[lo:hi]) / math.fsum(nu[lo:hi])
    else:
        f[lo:hi] = 0.0  # zero-mean on a single atom forces the zero function
    g = np.zeros(t.n_leaves)
    lo, hi = t.leaf_span[J]
    g[lo:hi] = rng.standard_normal(hi - lo)
    return I, J, f, g
