"""Vector eigenmodes of the ideal rectangular waveguide.

The waveguide has perfectly conducting walls and cross-section
``Omega = (0, L1) x (0, L2)``; lengths are measured in units of the
wavelength and the operating wavenumber defaults to ``k = 2*pi``.

Each transverse eigenvalue

    lambda_{j1,j2} = (pi*j1/L1)**2 + (pi*j2/L2)**2

carries one (TE only, when ``j1*j2 == 0``) or two (TE and TM) vector
modes ``phi``.  Modes with ``lambda < k**2`` propagate with wavenumber
``beta = sqrt(k**2 - lambda)``; the rest decay as ``exp(-beta*|z|)``
with ``beta = sqrt(lambda - k**2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TE = 1
TM = 2

PROPAGATING = "propagating"
EVANESCENT = "evanescent"

# Relative guard around the cutoff lambda == k**2 (a mode there would be
# a standing wave and the basis would be ill defined).
CUTOFF_GUARD = 1e-9


@dataclass(frozen=True)
class Geometry:
    """Waveguide cross-section ``(0, L1) x (0, L2)`` and wavenumber ``k``."""

    L1: float
    L2: float
    k: float = 2.0 * math.pi

    def __post_init__(self) -> None:
        if not (self.L1 > 0 and self.L2 > 0 and self.k > 0):
            raise ValueError("geometry requires L1 > 0, L2 > 0, k > 0")

    @property
    def area(self) -> float:
        return self.L1 * self.L2


@dataclass(frozen=True)
class ModeRecord:
    """One polarized mode of the transverse eigenvalue ``lam``."""

    j1: int
    j2: int
    s: int  # TE == 1, TM == 2
    lam: float
    beta: float
    kind: str  # "propagating" or "evanescent"
    alpha: float
    multiplicity: int

    @property
    def is_te(self) -> bool:
        return self.s == TE


@dataclass(frozen=True)
class ModeFamily:
    """All polarizations sharing one wavenumber pair ``(j1, j2)``."""

    j1: int
    j2: int
    lam: float
    beta: float
    kind: str
    multiplicity: int
    records: tuple[ModeRecord, ...]


@dataclass(frozen=True)
class ModeBasis:
    """Ordered catalogue of propagating and evanescent modes."""

    geometry: Geometry
    propagating: tuple[ModeRecord, ...]
    evanescent: tuple[ModeRecord, ...]
    families: tuple[ModeFamily, ...]
    evanescent_families: tuple[ModeFamily, ...]

    @property
    def n_propagating(self) -> int:
        """Number N of propagating wavenumber pairs (not polarized modes)."""
        return len(self.families)

    @property
    def n_amplitudes(self) -> int:
        """Total number of polarized propagating modes, sum of multiplicities."""
        return len(self.propagating)

    def index_of(self, j1: int, j2: int, s: int) -> int:
        """Position of a polarized mode in the flat propagating order."""
        for i, rec in enumerate(self.propagating):
            if (rec.j1, rec.j2, rec.s) == (j1, j2, s):
                return i
        raise KeyError(f"mode ({j1},{j2},s={s}) is not propagating in this basis")

    def table_rows(self) -> list[dict]:
        """Rows for the CSV mode table (j1, j2, s, lambda, beta, kind, alpha)."""
        rows = []
        for rec in self.propagating + self.evanescent:
            rows.append(
                {
                    "j1": rec.j1,
                    "j2": rec.j2,
                    "s": rec.s,
                    "lambda": rec.lam,
                    "beta": rec.beta,
                    "kind": rec.kind,
                    "alpha": rec.alpha,
                }
            )
        return rows


def _alpha(lam: float, L1: float, L2: float, degenerate_pair: bool) -> float:
    if degenerate_pair:
        return 2.0 / math.sqrt(lam * L1 * L2)
    return math.sqrt(2.0 / (lam * L1 * L2))


def _lambda(j1: int, j2: int, geom: Geometry) -> float:
    return (math.pi * j1 / geom.L1) ** 2 + (math.pi * j2 / geom.L2) ** 2


def enumerate_modes(geometry: Geometry, n_evanescent: int = 0) -> ModeBasis:
    """Enumerate all propagating modes and the first evanescent ones.

    Propagating families are every ``(j1, j2)`` with ``lambda < k**2``,
    sorted by ascending ``lambda`` (ties broken by ``(j1, j2)``, with a
    warning since ties only occur for rational ``L1/L2``).  The evanescent
    list holds the ``n_evanescent`` families with smallest ``lambda > k**2``.

    Raises ``ValueError`` when some ``lambda`` sits at the cutoff
    (``|k**2 - lambda| < 1e-9*k**2``), i.e. a standing wave.
    """
    if n_evanescent < 0:
        raise ValueError("n_evanescent must be >= 0")
    k2 = geometry.k**2

    # Grow the index box until it certainly contains every lambda below
    # the current threshold.
    lam_max = k2
    while True:
        J1 = int(math.ceil(geometry.L1 * math.sqrt(lam_max) / math.pi)) + 1
        J2 = int(math.ceil(geometry.L2 * math.sqrt(lam_max) / math.pi)) + 1
        entries = []
        for j1 in range(J1 + 1):
            for j2 in range(J2 + 1):
                if j1 == 0 and j2 == 0:
                    continue
                lam = _lambda(j1, j2, geometry)
                if lam <= lam_max:
                    entries.append((lam, j1, j2))
        n_above = sum(1 for lam, _, _ in entries if lam > k2)
        if n_above >= n_evanescent:
            break
        lam_max *= 1.5

    entries.sort()
    # guard only modes that are actually used: all propagating ones and
    # the first n_evanescent above the cutoff
    n_above = 0
    for lam, j1, j2 in entries:
        enumerated = lam < k2
        if not enumerated and n_above < n_evanescent:
            enumerated = True
            n_above += 1
        if enumerated and abs(k2 - lam) < CUTOFF_GUARD * k2:
            raise ValueError(
                f"standing wave at cutoff: lambda({j1},{j2}) = {lam!r} "
                f"within {CUTOFF_GUARD:g}*k^2 of k^2 = {k2!r}"
            )

    lams = [lam for lam, _, _ in entries if lam < k2]
    for a, b in zip(lams, lams[1:]):
        if abs(a - b) <= 1e-12 * k2:
            warnings.warn(
                "degenerate transverse eigenvalues (L1/L2 is rational); "
                "ties broken by ascending (j1, j2, s)",
                stacklevel=2,
            )
            break

    def build_family(lam: float, j1: int, j2: int) -> ModeFamily:
        kind = PROPAGATING if lam < k2 else EVANESCENT
        beta = math.sqrt(abs(k2 - lam))
        mult = 1 if j1 * j2 == 0 else 2
        alpha = _alpha(lam, geometry.L1, geometry.L2, degenerate_pair=mult == 2)
        pols = (TE,) if mult == 1 else (TE, TM)
        recs = tuple(
            ModeRecord(j1, j2, s, lam, beta, kind, alpha, mult) for s in pols
        )
        return ModeFamily(j1, j2, lam, beta, kind, mult, recs)

    prop_fams = [build_family(lam, j1, j2) for lam, j1, j2 in entries if lam < k2]
    evan_all = [build_family(lam, j1, j2) for lam, j1, j2 in entries if lam > k2]
    evan_fams = evan_all[:n_evanescent]

    return ModeBasis(
        geometry=geometry,
        propagating=tuple(r for f in prop_fams for r in f.records),
        evanescent=tuple(r for f in evan_fams for r in f.records),
        families=tuple(prop_fams),
        evanescent_families=tuple(evan_fams),
    )


# ---------------------------------------------------------------------------
# Pointwise mode evaluation
# ---------------------------------------------------------------------------


def eval_mode(mode: ModeRecord, geom: Geometry, x1, x2) -> np.ndarray:
    """Evaluate ``phi`` at points ``(x1, x2)``; returns shape ``(..., 2)``.

    TE modes are ``alpha * perp-grad[cos(a*x1)*cos(b*x2)]`` and TM modes
    ``alpha * grad[sin(a*x1)*sin(b*x2)]`` with ``a = pi*j1/L1``,
    ``b = pi*j2/L2``.  Boundary points are allowed.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a = math.pi * mode.j1 / geom.L1
    b = math.pi * mode.j2 / geom.L2
    c1, s1 = np.cos(a * x1), np.sin(a * x1)
    c2, s2 = np.cos(b * x2), np.sin(b * x2)
    if mode.s == TE:
        comp1 = b * c1 * s2
        comp2 = -a * s1 * c2
    else:
        comp1 = a * c1 * s2
        comp2 = b * s1 * c2
    return mode.alpha * np.stack(np.broadcast_arrays(comp1, comp2), axis=-1)


def mode_divergence(mode: ModeRecord, geom: Geometry, x1, x2) -> np.ndarray:
    """Analytic ``div phi``: zero for TE, ``-alpha*lambda*sin*sin`` for TM."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if mode.s == TE:
        return np.zeros(np.broadcast_shapes(x1.shape, x2.shape))
    a = math.pi * mode.j1 / geom.L1
    b = math.pi * mode.j2 / geom.L2
    return -mode.alpha * mode.lam * np.sin(a * x1) * np.sin(b * x2)


def mode_perp_divergence(mode: ModeRecord, geom: Geometry, x1, x2) -> np.ndarray:
    """Analytic ``perp-div phi``: ``-alpha*lambda*cos*cos`` for TE, zero for TM."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if mode.s == TM:
        return np.zeros(np.broadcast_shapes(x1.shape, x2.shape))
    a = math.pi * mode.j1 / geom.L1
    b = math.pi * mode.j2 / geom.L2
    return -mode.alpha * mode.lam * np.cos(a * x1) * np.cos(b * x2)


def grad_div_mode(mode: ModeRecord, geom: Geometry, x1, x2) -> np.ndarray:
    """Analytic ``grad(div phi)``: zero for TE and ``-lambda*phi`` for TM."""
    if mode.s == TE:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        shape = np.broadcast_shapes(x1.shape, x2.shape) + (2,)
        return np.zeros(shape)
    return -mode.lam * eval_mode(mode, geom, x1, x2)


def perp_grad_perp_div_mode(mode: ModeRecord, geom: Geometry, x1, x2) -> np.ndarray:
    """Analytic ``perp-grad(perp-div phi)``: ``-lambda*phi`` for TE, zero for TM."""
    if mode.s == TM:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        shape = np.broadcast_shapes(x1.shape, x2.shape) + (2,)
        return np.zeros(shape)
    return -mode.lam * eval_mode(mode, geom, x1, x2)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensorized Gauss-Legendre grid on the cross-section."""

    geometry: Geometry
    x1: np.ndarray
    w1: np.ndarray
    x2: np.ndarray
    w2: np.ndarray
    X1: np.ndarray = field(repr=False, default=None)
    X2: np.ndarray = field(repr=False, default=None)
    W: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def _axis(n: int, L: float) -> tuple[np.ndarray, np.ndarray]:
        xs, ws = np.polynomial.legendre.leggauss(n)
        return 0.5 * L * (xs + 1.0), 0.5 * L * ws

    @classmethod
    def build(cls, geometry: Geometry, n1: int, n2: int | None = None) -> "QuadratureGrid":
        if n2 is None:
            n2 = n1
        x1, w1 = cls._axis(n1, geometry.L1)
        x2, w2 = cls._axis(n2, geometry.L2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        W = np.outer(w1, w2)
        return cls(geometry, x1, w1, x2, w2, X1, X2, W)

    @classmethod
    def for_basis(cls, basis: ModeBasis, order_factor: int = 4, order_pad: int = 8) -> "QuadratureGrid":
        """Order ``order_factor * max_index + order_pad`` per axis."""
        recs = basis.propagating + basis.evanescent
        m1 = max((r.j1 for r in recs), default=1)
        m2 = max((r.j2 for r in recs), default=1)
        return cls.build(
            basis.geometry,
            order_factor * m1 + order_pad,
            order_factor * m2 + order_pad,
        )

    def integrate(self, values: np.ndarray) -> float:
        """Integrate scalar samples of shape ``(n1, n2)`` over the cross-section."""
        return float(np.sum(self.W * values))


def mode_inner_product(a: ModeRecord, b: ModeRecord, geom: Geometry, quad: QuadratureGrid) -> float:
    """Quadrature of ``phi_a . phi_b``; orthonormal up to grid tolerance."""
    fa = eval_mode(a, geom, quad.X1, quad.X2)
    fb = eval_mode(b, geom, quad.X1, quad.X2)
    return quad.integrate(np.sum(fa * fb, axis=-1))


# ---------------------------------------------------------------------------
# Source projection
# ---------------------------------------------------------------------------


@dataclass
class SourceSpec:
    """Current source at z = 0.

    ``J(x1, x2)`` samples the transverse current (shape ``(..., 2)``),
    ``Jz(x1, x2)`` the longitudinal one.  ``grad_Jz`` is optional; when
    missing the gradient is formed by central differences.
    """

    J: object = None
    Jz: object = None
    grad_Jz: object = None
    c_o: float = 1.0

    def sample_J(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        if self.J is None:
            return np.zeros(X1.shape + (2,))
        vals = np.asarray(self.J(X1, X2), dtype=float)
        if vals.shape != X1.shape + (2,):
            raise ValueError(f"J sampler returned shape {vals.shape}, expected {X1.shape + (2,)}")
        return vals

    def sample_grad_Jz(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        if self.Jz is None:
            return np.zeros(X1.shape + (2,))
        if self.grad_Jz is not None:
            vals = np.asarray(self.grad_Jz(X1, X2), dtype=float)
        else:
            h = 1e-6 * min(X1.max() - X1.min() + 1.0, X2.max() - X2.min() + 1.0)
            d1 = (self.Jz(X1 + h, X2) - self.Jz(X1 - h, X2)) / (2 * h)
            d2 = (self.Jz(X1, X2 + h) - self.Jz(X1, X2 - h)) / (2 * h)
            vals = np.stack(np.broadcast_arrays(d1, d2), axis=-1)
        if vals.shape != X1.shape + (2,):
            raise ValueError("grad_Jz sampler returned the wrong shape")
        return vals


@dataclass(frozen=True)
class SourceAmplitudes:
    """Forward amplitudes at z = 0+ and evanescent coefficients."""

    A: np.ndarray  # complex, aligned with basis.propagating
    E: np.ndarray  # complex, aligned with basis.evanescent


def project_source(basis: ModeBasis, src: SourceSpec, quad: QuadratureGrid) -> SourceAmplitudes:
    """Project a source onto mode amplitudes.

    For a propagating mode the forward amplitude right of the source is

        A = -(1/(2 c_o)) * wJ * <phi, J> - (i/(2 c_o k)) * wz * <grad Jz, phi>

    with weights ``wJ = sqrt(k/beta)`` (TE) or ``sqrt(beta/k)`` (TM) and
    ``wz`` the reciprocal pairing.  Evanescent coefficients use
    ``wJ -> i/2c_o * (sqrt(k/beta), -sqrt(beta/k))`` and the same ``wz`` term
    with a minus sign for z > 0.
    """
    geom = basis.geometry
    k = geom.k
    Jv = src.sample_J(quad.X1, quad.X2)
    Gv = src.sample_grad_Jz(quad.X1, quad.X2)
    if not (np.all(np.isfinite(Jv)) and np.all(np.isfinite(Gv))):
        raise ValueError("source fields contain non-finite samples")

    def pairings(rec: ModeRecord) -> tuple[float, float]:
        phi = eval_mode(rec, geom, quad.X1, quad.X2)
        ip_J = quad.integrate(np.sum(phi * Jv, axis=-1))
        ip_G = quad.integrate(np.sum(Gv * phi, axis=-1))
        return ip_J, ip_G

    A = np.zeros(len(basis.propagating), dtype=complex)
    for i, rec in enumerate(basis.propagating):
        wJ = math.sqrt(k / rec.beta) if rec.s == TE else math.sqrt(rec.beta / k)
        wz = math.sqrt(rec.beta / k) if rec.s == TE else math.sqrt(k / rec.beta)
        ip_J, ip_G = pairings(rec)
        A[i] = -ip_J * wJ / (2 * src.c_o) - 1j * wz * ip_G / (2 * src.c_o * k)

    E = np.zeros(len(basis.evanescent), dtype=complex)
    for i, rec in enumerate(basis.evanescent):
        wJ = math.sqrt(k / rec.beta) if rec.s == TE else -math.sqrt(rec.beta / k)
        wz = math.sqrt(rec.beta / k) if rec.s == TE else math.sqrt(k / rec.beta)
        ip_J, ip_G = pairings(rec)
        E[i] = 1j * wJ * ip_J / (2 * src.c_o) - 1j * wz * ip_G / (2 * src.c_o * k)

    return SourceAmplitudes(A=A, E=E)


def ideal_flux(amps: SourceAmplitudes) -> float:
    """Scaled energy flux at z > 0: sum of |A|^2 over propagating modes.

    Evanescent modes carry no flux and are ignored.
    """
    return float(np.sum(np.abs(amps.A) ** 2))
