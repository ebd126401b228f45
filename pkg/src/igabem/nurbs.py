"""NURBS basis evaluation, derivatives, refinement and Greville abscissae.

All parameter domains are normalised to [0, 1].  Knot vectors are open
(clamped): the first and last knot are repeated degree+1 times.  Basis
evaluation returns only the degree+1 functions that do not vanish at the
query parameter, together with the index of the first one, so callers can
assemble locally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterDomainError(ValueError):
    """Parameter outside the [0, 1] domain."""


class KnotMultiplicityError(ValueError):
    """Knot insertion would exceed the maximum interior multiplicity."""


def _as_points(u):
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
        raise ParameterDomainError(f"parameter outside [0,1]: {arr.min()}..{arr.max()}")
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot vector on [0, 1] with a fixed polynomial degree."""

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise ValueError("degree must be nonnegative")
        if len(knots) < 2 * (p + 1):
            raise ValueError("knot vector too short for degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must span [0,1]")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-p - 1 :] != 1.0):
            raise ValueError("knot vector must be clamped (open)")

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    def find_span(self, u):
        """Index of the knot span containing each parameter."""
        u = _as_points(u)
        span = np.searchsorted(self.knots, u, side="right") - 1
        return np.clip(span, self.degree, self.n_basis - 1)

    def basis(self, u):
        """Nonzero basis values.

        Returns (values, first) with values of shape (m, degree+1) and
        first[i] the index of the first nonvanishing function at u[i].
        """
        u = _as_points(u)
        p = self.degree
        span = self.find_span(u)
        m = len(u)
        N = np.zeros((m, p + 1))
        N[:, 0] = 1.0
        left = np.zeros((m, p + 1))
        right = np.zeros((m, p + 1))
        for j in range(1, p + 1):
            left[:, j] = u - self.knots[span + 1 - j]
            right[:, j] = self.knots[span + j] - u
            saved = np.zeros(m)
            for r in range(j):
                temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
                N[:, r] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            N[:, j] = saved
        return N, span - p

    def basis_derivatives(self, u):
        """Nonzero basis values and first derivatives: (values, ders, first)."""
        u = _as_points(u)
        p = self.degree
        span = self.find_span(u)
        m = len(u)
        # ndu[j][r]: triangular table of basis values and knot differences
        ndu = np.zeros((m, p + 1, p + 1))
        ndu[:, 0, 0] = 1.0
        left = np.zeros((m, p + 1))
        right = np.zeros((m, p + 1))
        for j in range(1, p + 1):
            left[:, j] = u - self.knots[span + 1 - j]
            right[:, j] = self.knots[span + j] - u
            saved = np.zeros(m)
            for r in range(j):
                ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
                temp = ndu[:, r, j - 1] / ndu[:, j, r]
                ndu[:, r, j] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            ndu[:, j, j] = saved
        vals = ndu[:, :, p].copy()
        ders = np.zeros((m, p + 1))
        if p > 0:
            for r in range(p + 1):
                d = np.zeros(m)
                if r >= 1:
                    d += ndu[:, r - 1, p - 1] / ndu[:, p, r - 1]
                if r <= p - 1:
                    d -= ndu[:, r, p - 1] / ndu[:, p, r]
                ders[:, r] = p * d
        return vals, ders, span - p

    def greville(self) -> np.ndarray:
        """Knot-average collocation abscissae, one per basis function."""
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        return np.array(
            [self.knots[i + 1 : i + p + 1].mean() for i in range(self.n_basis)]
        )

    def interior_multiplicity(self, u: float) -> int:
        return int(np.sum(np.abs(self.knots - u) < 1e-12))

    def spans(self) -> np.ndarray:
        """Distinct break points (span boundaries)."""
        return np.unique(self.knots)

    def inserted(self, u: float) -> "KnotVector":
        if not 0.0 < u < 1.0:
            raise ParameterDomainError("insertion parameter must be interior")
        if self.interior_multiplicity(u) >= self.degree:
            raise KnotMultiplicityError(
                f"multiplicity of {u} already {self.degree}; cannot insert"
            )
        return KnotVector(np.sort(np.append(self.knots, u)), self.degree)


def insert_knot_coeffs(kv: KnotVector, u: float):
    """Control-point update for a single knot insertion.

    Returns (new_kv, rows) where rows[i] = (j, alpha) builds new control
    point i as alpha*P[j] + (1-alpha)*P[j-1], in homogeneous coordinates.
    """
    new_kv = kv.inserted(u)
    p = kv.degree
    k = int(kv.find_span(u)[0])
    rows = []
    for i in range(kv.n_basis + 1):
        if i <= k - p:
            rows.append((i, 1.0))
        elif i > k:
            rows.append((i - 1, 0.0))
        else:
            denom = kv.knots[i + p] - kv.knots[i]
            alpha = (u - kv.knots[i]) / denom if denom > 0 else 0.0
            rows.append((i, alpha))
    return new_kv, rows


def apply_insertion(kv: KnotVector, hom: np.ndarray, u: float):
    """Insert a knot; hom is (n, ...) homogeneous data (weights last or alone)."""
    new_kv, rows = insert_knot_coeffs(kv, u)
    out = np.empty((new_kv.n_basis,) + hom.shape[1:], dtype=float)
    for i, (j, alpha) in enumerate(rows):
        if alpha == 1.0:
            out[i] = hom[j]
        elif alpha == 0.0:
            out[i] = hom[j]
        else:
            out[i] = alpha * hom[j] + (1.0 - alpha) * hom[j - 1]
    return new_kv, out


def elevated_knot_vector(kv: KnotVector) -> KnotVector:
    """Knot vector of the degree-elevated space (every multiplicity + 1)."""
    vals, counts = np.unique(kv.knots, return_counts=True)
    knots = np.repeat(vals, counts + 1)
    return KnotVector(knots, kv.degree + 1)


def elevate_homogeneous(kv: KnotVector, hom: np.ndarray):
    """Degree-elevate by re-interpolation in the containing spline space.

    The elevated space contains the original piecewise polynomial exactly, so
    collocating the homogeneous components at the Greville abscissae of the
    elevated knot vector reproduces the data to solver precision.
    """
    new_kv = elevated_knot_vector(kv)
    g = new_kv.greville()
    vals_old, first_old = kv.basis(g)
    n_old = kv.n_basis
    A_old = np.zeros((len(g), n_old))
    for i in range(len(g)):
        A_old[i, first_old[i] : first_old[i] + kv.degree + 1] = vals_old[i]
    target = A_old @ hom.reshape(n_old, -1)
    vals_new, first_new = new_kv.basis(g)
    n_new = new_kv.n_basis
    A_new = np.zeros((len(g), n_new))
    for i in range(len(g)):
        A_new[i, first_new[i] : first_new[i] + new_kv.degree + 1] = vals_new[i]
    out = np.linalg.solve(A_new, target)
    return new_kv, out.reshape((n_new,) + hom.shape[1:])


@dataclass(frozen=True)
class NurbsCurve:
    """Weighted B-spline curve in 3-D."""

    knot: KnotVector
    control: np.ndarray  # (n, 3)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float).reshape(-1, 3)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "weights", weights)
        if len(control) != self.knot.n_basis or len(weights) != self.knot.n_basis:
            raise ValueError("control point count inconsistent with knot vector")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")

    def rational_basis(self, u):
        vals, first = self.knot.basis(u)
        p = self.knot.degree
        idx = first[:, None] + np.arange(p + 1)[None, :]
        w = self.weights[idx]
        Nw = vals * w
        W = Nw.sum(axis=1)
        return Nw / W[:, None], first

    def rational_basis_derivatives(self, u):
        vals, ders, first = self.knot.basis_derivatives(u)
        p = self.knot.degree
        idx = first[:, None] + np.arange(p + 1)[None, :]
        w = self.weights[idx]
        Nw = vals * w
        dNw = ders * w
        W = Nw.sum(axis=1)
        dW = dNw.sum(axis=1)
        R = Nw / W[:, None]
        dR = (dNw - R * dW[:, None]) / W[:, None]
        return R, dR, first

    def evaluate(self, u):
        R, first = self.rational_basis(u)
        p = self.knot.degree
        idx = first[:, None] + np.arange(p + 1)[None, :]
        return np.einsum("mk,mkd->md", R, self.control[idx])

    def derivatives(self, u):
        R, dR, first = self.rational_basis_derivatives(u)
        p = self.knot.degree
        idx = first[:, None] + np.arange(p + 1)[None, :]
        pts = np.einsum("mk,mkd->md", R, self.control[idx])
        tang = np.einsum("mk,mkd->md", dR, self.control[idx])
        return pts, tang

    def _homogeneous(self):
        return np.concatenate(
            [self.control * self.weights[:, None], self.weights[:, None]], axis=1
        )

    @staticmethod
    def _from_homogeneous(kv, hom):
        w = hom[:, 3]
        return NurbsCurve(kv, hom[:, :3] / w[:, None], w)

    def insert_knot(self, u: float) -> "NurbsCurve":
        kv, hom = apply_insertion(self.knot, self._homogeneous(), u)
        return NurbsCurve._from_homogeneous(kv, hom)

    def elevate(self) -> "NurbsCurve":
        kv, hom = elevate_homogeneous(self.knot, self._homogeneous())
        return NurbsCurve._from_homogeneous(kv, hom)

    def length_scale(self) -> float:
        lo = self.control.min(axis=0)
        hi = self.control.max(axis=0)
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class NurbsSurface:
    """Tensor-product NURBS surface.

    Control points are numbered consecutively, first in the u- then in the
    v-direction; internally they are stored as an (nu, nv, 3) array.
    """

    knot_u: KnotVector
    knot_v: KnotVector
    control: np.ndarray  # (nu, nv, 3)
    weights: np.ndarray  # (nu, nv)

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        nu, nv = self.knot_u.n_basis, self.knot_v.n_basis
        control = control.reshape(nu, nv, 3)
        weights = weights.reshape(nu, nv)
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "weights", weights)
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def shape(self):
        return (self.knot_u.n_basis, self.knot_v.n_basis)

    def _gather(self, first_u, first_v):
        pu, pv = self.knot_u.degree, self.knot_v.degree
        iu = first_u[:, None] + np.arange(pu + 1)[None, :]
        iv = first_v[:, None] + np.arange(pv + 1)[None, :]
        ctrl = self.control[iu[:, :, None], iv[:, None, :]]
        w = self.weights[iu[:, :, None], iv[:, None, :]]
        return ctrl, w, iu, iv

    def rational_basis(self, u, v):
        """Nonzero rational basis values: (m, (pu+1)*(pv+1)) plus index grid."""
        Nu, fu = self.knot_u.basis(u)
        Nv, fv = self.knot_v.basis(v)
        ctrl, w, iu, iv = self._gather(fu, fv)
        Nw = np.einsum("ma,mb->mab", Nu, Nv) * w
        W = Nw.sum(axis=(1, 2))
        R = Nw / W[:, None, None]
        return R, iu, iv

    def rational_basis_derivatives(self, u, v):
        Nu, dNu, fu = self.knot_u.basis_derivatives(u)
        Nv, dNv, fv = self.knot_v.basis_derivatives(v)
        ctrl, w, iu, iv = self._gather(fu, fv)
        Nw = np.einsum("ma,mb->mab", Nu, Nv) * w
        Nw_u = np.einsum("ma,mb->mab", dNu, Nv) * w
        Nw_v = np.einsum("ma,mb->mab", Nu, dNv) * w
        W = Nw.sum(axis=(1, 2))
        Wu = Nw_u.sum(axis=(1, 2))
        Wv = Nw_v.sum(axis=(1, 2))
        R = Nw / W[:, None, None]
        Ru = (Nw_u - R * Wu[:, None, None]) / W[:, None, None]
        Rv = (Nw_v - R * Wv[:, None, None]) / W[:, None, None]
        return R, Ru, Rv, iu, iv

    def evaluate(self, u, v):
        R, iu, iv = self.rational_basis(u, v)
        ctrl = self.control[iu[:, :, None], iv[:, None, :]]
        return np.einsum("mab,mabd->md", R, ctrl)

    def derivatives(self, u, v):
        """Returns (x, x_u, x_v) arrays of shape (m, 3)."""
        R, Ru, Rv, iu, iv = self.rational_basis_derivatives(u, v)
        ctrl = self.control[iu[:, :, None], iv[:, None, :]]
        x = np.einsum("mab,mabd->md", R, ctrl)
        xu = np.einsum("mab,mabd->md", Ru, ctrl)
        xv = np.einsum("mab,mabd->md", Rv, ctrl)
        return x, xu, xv

    def _hom_grid(self):
        return np.concatenate(
            [self.control * self.weights[..., None], self.weights[..., None]], axis=2
        )

    @staticmethod
    def _from_hom(ku, kv, hom):
        w = hom[..., 3]
        return NurbsSurface(ku, kv, hom[..., :3] / w[..., None], w)

    def insert_knot(self, direction: str, u: float) -> "NurbsSurface":
        """Insert a knot in 'u' or 'v'; the surface is unchanged geometrically."""
        hom = self._hom_grid()
        if direction == "u":
            new_ku, out = apply_insertion(self.knot_u, hom.reshape(hom.shape[0], -1), u)
            out = out.reshape(new_ku.n_basis, hom.shape[1], 4)
            return NurbsSurface._from_hom(new_ku, self.knot_v, out)
        if direction == "v":
            hom_t = np.transpose(hom, (1, 0, 2))
            new_kv, out = apply_insertion(
                self.knot_v, hom_t.reshape(hom_t.shape[0], -1), u
            )
            out = out.reshape(new_kv.n_basis, hom.shape[0], 4)
            return NurbsSurface._from_hom(
                self.knot_u, new_kv, np.transpose(out, (1, 0, 2))
            )
        raise ValueError("direction must be 'u' or 'v'")

    def elevate(self, direction: str) -> "NurbsSurface":
        """Raise the degree by one in the chosen direction."""
        hom = self._hom_grid()
        if direction == "u":
            new_ku, out = elevate_homogeneous(
                self.knot_u, hom.reshape(hom.shape[0], -1)
            )
            out = out.reshape(new_ku.n_basis, hom.shape[1], 4)
            return NurbsSurface._from_hom(new_ku, self.knot_v, out)
        if direction == "v":
            hom_t = np.transpose(hom, (1, 0, 2))
            new_kv, out = elevate_homogeneous(
                self.knot_v, hom_t.reshape(hom_t.shape[0], -1)
            )
            out = out.reshape(new_kv.n_basis, hom.shape[0], 4)
            return NurbsSurface._from_hom(
                self.knot_u, new_kv, np.transpose(out, (1, 0, 2))
            )
        raise ValueError("direction must be 'u' or 'v'")

    def length_scale(self) -> float:
        flat = self.control.reshape(-1, 3)
        return float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))


@dataclass(frozen=True)
class FieldBasis2D:
    """Rational tensor-product basis used for field approximation.

    Decoupled from the geometry: refinement acts on this basis only, leaving
    the geometric mapping untouched.
    """

    knot_u: KnotVector
    knot_v: KnotVector
    weights: np.ndarray  # (nu, nv)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(
            self.knot_u.n_basis, self.knot_v.n_basis
        )
        object.__setattr__(self, "weights", w)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    @property
    def shape(self):
        return (self.knot_u.n_basis, self.knot_v.n_basis)

    @property
    def n_basis(self):
        return self.knot_u.n_basis * self.knot_v.n_basis

    def evaluate(self, u, v):
        """Nonzero rational basis values plus (iu, iv) index grids."""
        Nu, fu = self.knot_u.basis(u)
        Nv, fv = self.knot_v.basis(v)
        pu, pv = self.knot_u.degree, self.knot_v.degree
        iu = fu[:, None] + np.arange(pu + 1)[None, :]
        iv = fv[:, None] + np.arange(pv + 1)[None, :]
        w = self.weights[iu[:, :, None], iv[:, None, :]]
        Nw = np.einsum("ma,mb->mab", Nu, Nv) * w
        W = Nw.sum(axis=(1, 2))
        return Nw / W[:, None, None], iu, iv

    def greville_grid(self):
        return self.knot_u.greville(), self.knot_v.greville()

    def insert_knot(self, direction: str, u: float) -> "FieldBasis2D":
        if direction == "u":
            kv, w = apply_insertion(self.knot_u, self.weights, u)
            return FieldBasis2D(kv, self.knot_v, w)
        if direction == "v":
            kv, w = apply_insertion(self.knot_v, self.weights.T, u)
            return FieldBasis2D(self.knot_u, kv, w.T)
        raise ValueError("direction must be 'u' or 'v'")

    def elevate(self, direction: str) -> "FieldBasis2D":
        if direction == "u":
            kv, w = elevate_homogeneous(self.knot_u, self.weights)
            return FieldBasis2D(kv, self.knot_v, w)
        if direction == "v":
            kv, w = elevate_homogeneous(self.knot_v, self.weights.T)
            return FieldBasis2D(self.knot_u, kv, w.T)
        raise ValueError("direction must be 'u' or 'v'")

    @staticmethod
    def from_surface(s: NurbsSurface) -> "FieldBasis2D":
        return FieldBasis2D(s.knot_u, s.knot_v, s.weights.copy())


@dataclass(frozen=True)
class FieldBasis1D:
    """Rational curve basis (used along the finite edge of infinite patches)."""

    knot: KnotVector
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        if len(w) != self.knot.n_basis:
            raise ValueError("weight count inconsistent with knot vector")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    @property
    def n_basis(self):
        return self.knot.n_basis

    def evaluate(self, u):
        vals, first = self.knot.basis(u)
        p = self.knot.degree
        idx = first[:, None] + np.arange(p + 1)[None, :]
        Nw = vals * self.weights[idx]
        W = Nw.sum(axis=1)
        return Nw / W[:, None], first

    def greville(self):
        return self.knot.greville()

    def insert_knot(self, u: float) -> "FieldBasis1D":
        kv, w = apply_insertion(self.knot, self.weights[:, None], u)
        return FieldBasis1D(kv, w[:, 0])

    def elevate(self) -> "FieldBasis1D":
        kv, w = elevate_homogeneous(self.knot, self.weights[:, None])
        return FieldBasis1D(kv, w[:, 0])


def eval_basis(knot: KnotVector, weights, u):
    """Rational basis values at one parameter: (values, first_index)."""
    basis = FieldBasis1D(knot, np.asarray(weights, dtype=float))
    vals, first = basis.evaluate([u])
    return vals[0], int(first[0])


def eval_basis_derivatives(knot: KnotVector, weights, u):
    """Rational basis values and first derivatives at one parameter."""
    w = np.asarray(weights, dtype=float)
    vals, ders, first = knot.basis_derivatives([u])
    p = knot.degree
    idx = first[0] + np.arange(p + 1)
    Nw = vals[0] * w[idx]
    dNw = ders[0] * w[idx]
    W = Nw.sum()
    dW = dNw.sum()
    R = Nw / W
    dR = (dNw - R * dW) / W
    return R, dR, int(first[0])


def greville_abscissae(knot: KnotVector) -> np.ndarray:
    return knot.greville()
