"""Equal-range cross-covariances of the mode-coupling processes.

Scattering couples modes through two families of range-stationary
processes obtained by integrating the fluctuation field against mode
products over the cross-section,

    Psi_{jl}^{(sq)}(z)   <- phi_j^(s) . phi_l^(q),
    Theta_{jl}^{(sq)}(z) <- (div phi_j^(s)) (div phi_l^(q)),

the latter nonzero only for TM-TM pairs.  With a separable covariance
every second moment factorizes as ``E{X_a(z) X_b(0)} = sigma2 * B(f_a, f_b) * g(z)``
where

    B(f, h) = integral over Omega x Omega of kernel(x - x') f(x) h(x')

depends on the transverse kernel alone.  This module evaluates B for all
pair fields and caches the blocks every moment formula needs.

Each pair field is a sum of at most two separable products of 1-D
cosines/sines, so for an axis-separable kernel each 4-D integral reduces
to products of two small 1-D cosine-moment tables (O(n^2) once per axis,
O(1) per entry afterwards).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .medium import CovarianceModel
from .modes import (
    TE,
    TM,
    Geometry,
    ModeBasis,
    ModeFamily,
    ModeRecord,
    QuadratureGrid,
    eval_mode,
    mode_divergence,
)

TENSOR_FORMAT_VERSION = 1

PSI = "PSI"
THETA = "THETA"

_CC = 0  # cos * cos product along an axis
_SS = 1  # sin * sin product along an axis


@dataclass(frozen=True)
class PairField:
    """Spatial profile of one coupling process between two modes."""

    left: ModeRecord
    right: ModeRecord
    kind: str  # PSI or THETA

    def __post_init__(self) -> None:
        if self.kind not in (PSI, THETA):
            raise ValueError(f"unknown pair-field kind {self.kind!r}")

    def sampler(self, geom: Geometry, x1, x2) -> np.ndarray:
        """Pointwise profile values (THETA vanishes unless both modes are TM)."""
        if self.kind == PSI:
            fa = eval_mode(self.left, geom, x1, x2)
            fb = eval_mode(self.right, geom, x1, x2)
            return np.sum(fa * fb, axis=-1)
        da = mode_divergence(self.left, geom, x1, x2)
        db = mode_divergence(self.right, geom, x1, x2)
        return da * db

    def terms(self, geom: Geometry) -> list[tuple[float, tuple, tuple]]:
        """Separable expansion: list of (coef, axis1-term, axis2-term).

        An axis term is ``(_CC or _SS, m, m')`` for the product of two
        cosines or two sines with integer frequencies ``m``, ``m'``.
        """
        a_l = self.left
        a_r = self.right
        aj = math.pi * a_l.j1 / geom.L1
        bj = math.pi * a_l.j2 / geom.L2
        al = math.pi * a_r.j1 / geom.L1
        bl = math.pi * a_r.j2 / geom.L2
        scale = a_l.alpha * a_r.alpha
        if self.kind == THETA:
            if a_l.s != TM or a_r.s != TM:
                return []
            coef = scale * a_l.lam * a_r.lam
            return [(coef, (_SS, a_l.j1, a_r.j1), (_SS, a_l.j2, a_r.j2))]
        s, q = a_l.s, a_r.s
        if (s, q) == (TE, TE):
            cx, cy = bj * bl, aj * al
        elif (s, q) == (TE, TM):
            cx, cy = bj * al, -aj * bl
        elif (s, q) == (TM, TE):
            cx, cy = aj * bl, -bj * al
        else:
            cx, cy = aj * al, bj * bl
        return [
            (scale * cx, (_CC, a_l.j1, a_r.j1), (_SS, a_l.j2, a_r.j2)),
            (scale * cy, (_SS, a_l.j1, a_r.j1), (_CC, a_l.j2, a_r.j2)),
        ]


def _axis_weights(term: tuple) -> list[tuple[int, float]]:
    """Expand a cos*cos or sin*sin product into single-frequency cosines."""
    typ, m, mp = term
    lo, hi = abs(m - mp), m + mp
    out: dict[int, float] = {}
    out[lo] = out.get(lo, 0.0) + 0.5
    sign = 0.5 if typ == _CC else -0.5
    out[hi] = out.get(hi, 0.0) + sign
    return [(mu, w) for mu, w in out.items() if w != 0.0]


class TrigTables:
    """Per-axis double integrals of the kernel against cosine pairs.

    ``G[axis][mu, nu] = int int K_axis(x - x') cos(mu pi x / L) cos(nu pi x' / L)``
    evaluated by Gauss-Legendre quadrature; the kernel positive-definiteness
    makes every Gram assembled from these tables PSD up to rounding.
    """

    def __init__(self, geom: Geometry, model: CovarianceModel, max_freq: int, n_nodes: int):
        if not model.axis_separable:
            raise ValueError("TrigTables requires an axis-separable kernel")
        self.geometry = geom
        self.model = model
        self.max_freq = int(max_freq)
        self.n_nodes = int(n_nodes)
        self.G = [
            self._axis_table(geom.L1, max_freq, n_nodes),
            self._axis_table(geom.L2, max_freq, n_nodes),
        ]

    def _axis_table(self, L: float, max_freq: int, n: int) -> np.ndarray:
        xs, ws = np.polynomial.legendre.leggauss(n)
        x = 0.5 * L * (xs + 1.0)
        w = 0.5 * L * ws
        K = self.model.axis_kernel(x[:, None] - x[None, :])
        mus = np.arange(max_freq + 1)
        C = np.cos(np.pi * np.outer(x, mus) / L)  # (n, F)
        WC = C * w[:, None]
        G = WC.T @ K @ WC
        return 0.5 * (G + G.T)

    def pairing(self, axis: int, ta: tuple, tb: tuple) -> float:
        total = 0.0
        for mu, wa in _axis_weights(ta):
            for nu, wb in _axis_weights(tb):
                total += wa * wb * self.G[axis][mu, nu]
        return total

    def bvalue(self, fa: PairField, fb: PairField) -> float:
        """B(f_a, f_b); canonical argument order keeps swap symmetry exact."""
        ka = (fa.kind, fa.left.j1, fa.left.j2, fa.left.s, fa.right.j1, fa.right.j2, fa.right.s)
        kb = (fb.kind, fb.left.j1, fb.left.j2, fb.left.s, fb.right.j1, fb.right.j2, fb.right.s)
        if kb < ka:
            fa, fb = fb, fa
        geom = self.geometry
        total = 0.0
        for ca, a1, a2 in fa.terms(geom):
            for cb, b1, b2 in fb.terms(geom):
                total += ca * cb * self.pairing(0, a1, b1) * self.pairing(1, a2, b2)
        return total


def cross_range_covariance(
    basis: ModeBasis,
    model: CovarianceModel,
    fieldA: PairField,
    fieldB: PairField,
    quad: QuadratureGrid | None = None,
    tables: TrigTables | None = None,
) -> float:
    """Transverse-kernel bilinear form B between two pair fields.

    Uses the separable-cosine factorization whenever the kernel factors
    across axes (the gaussian kind); otherwise contracts samples on the
    full tensor grid and warns if doubling the order moves the value by
    more than 1e-6 relative.
    """
    if model.axis_separable:
        if tables is None:
            tables = _tables_for(basis, model)
        return tables.bvalue(fieldA, fieldB)
    if quad is None:
        quad = QuadratureGrid.for_basis(basis)
    val = _dense_bvalue(model, fieldA, fieldB, quad)
    finer = QuadratureGrid.build(basis.geometry, 2 * len(quad.x1), 2 * len(quad.x2))
    val2 = _dense_bvalue(model, fieldA, fieldB, finer)
    if abs(val2 - val) > 1e-6 * max(1.0, abs(val2)):
        import warnings

        warnings.warn(
            f"quadrature under-resolution in cross_range_covariance "
            f"(order doubling moved value by {abs(val2 - val):.3e}); refined value used",
            stacklevel=2,
        )
    return val2


def _dense_bvalue(model: CovarianceModel, fa: PairField, fb: PairField, quad: QuadratureGrid) -> float:
    geom = quad.geometry
    f = (fa.sampler(geom, quad.X1, quad.X2) * quad.W).ravel()
    h = (fb.sampler(geom, quad.X1, quad.X2) * quad.W).ravel()
    dx1 = (quad.X1.ravel()[:, None] - quad.X1.ravel()[None, :])
    dx2 = (quad.X2.ravel()[:, None] - quad.X2.ravel()[None, :])
    K = model.kernel(dx1, dx2)
    return float(f @ K @ h)


def _tables_for(basis: ModeBasis, model: CovarianceModel, n_nodes: int | None = None) -> TrigTables:
    recs = basis.propagating + basis.evanescent
    m1 = max((r.j1 for r in recs), default=1)
    m2 = max((r.j2 for r in recs), default=1)
    max_freq = 2 * max(m1, m2)
    if n_nodes is None:
        n_nodes = 4 * max_freq + 16
    return TrigTables(basis.geometry, model, max_freq, n_nodes)


# ---------------------------------------------------------------------------
# Assembled tensor over all mode pairs
# ---------------------------------------------------------------------------


def _pol_count(fam: ModeFamily) -> int:
    return fam.multiplicity


@dataclass
class CouplingTensor:
    """Same-pair covariance blocks for every (propagating, any) family pair.

    For families J (propagating, row) and L (propagating or evanescent):

    - ``bpp[J, L, s, q, s', q']`` = B(Psi profile (s,q), Psi profile (s',q'))
    - ``bpt[J, L, s, q]``         = B(Psi profile (s,q), Theta profile)
    - ``btt[J, L]``               = B(Theta, Theta)

    Polarization slots beyond a family's multiplicity are zero.  All values
    are for the unit-variance kernel; multiply by ``sigma2`` where the
    covariance is needed.
    """

    geometry: Geometry
    n_prop: int
    n_ev: int
    mult: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    bpp: np.ndarray
    bpt: np.ndarray
    btt: np.ndarray
    content_hash: str
    meta: dict = field(default_factory=dict)
    _tables: TrigTables | None = field(default=None, repr=False)

    @property
    def n_all(self) -> int:
        return self.n_prop + self.n_ev

    def require_pair(self, jf: int, lf: int) -> None:
        if not (0 <= jf < self.n_prop and 0 <= lf < self.n_all):
            raise KeyError(f"coupling tensor has no entry for family pair ({jf}, {lf})")

    def pair_gram(self, fields: list[PairField], basis: ModeBasis, model: CovarianceModel) -> np.ndarray:
        """Gram matrix of B-values over an arbitrary family of pair fields."""
        tables = self._tables
        if tables is None:
            tables = _tables_for(basis, model)
        n = len(fields)
        G = np.zeros((n, n))
        for a in range(n):
            for b in range(a, n):
                v = tables.bvalue(fields[a], fields[b])
                G[a, b] = v
                G[b, a] = v
        return G


def _content_hash(geom: Geometry, model: CovarianceModel, n_ev: int, n_nodes: int) -> str:
    payload = {
        "version": TENSOR_FORMAT_VERSION,
        "L1": geom.L1,
        "L2": geom.L2,
        "k": geom.k,
        "kind": model.kind,
        "ell": model.ell,
        "n_ev": n_ev,
        "n_nodes": n_nodes,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def assemble_coupling_tensor(
    basis: ModeBasis,
    model: CovarianceModel,
    quad: QuadratureGrid | None = None,
    include_evanescent: bool = False,
    n_ev: int | None = None,
    n_nodes: int | None = None,
) -> CouplingTensor:
    """Evaluate every same-pair B block needed by the moment formulas.

    ``n_ev`` caps the evanescent rows (default: all enumerated in the
    basis).  Deterministic: entries depend only on geometry, model and
    quadrature order.
    """
    fams = list(basis.families)
    evs = list(basis.evanescent_families)
    if include_evanescent:
        if n_ev is None:
            n_ev = len(evs)
        if n_ev > len(evs):
            raise ValueError(
                f"basis holds {len(evs)} evanescent families, {n_ev} requested"
            )
        evs = evs[:n_ev]
    else:
        evs = []
    all_fams = fams + evs
    n_prop, n_all = len(fams), len(all_fams)

    if model.axis_separable:
        tables = _tables_for(basis, model, n_nodes=n_nodes)
    else:
        tables = None
        if quad is None:
            quad = QuadratureGrid.build(basis.geometry, 48, 48)

    bpp = np.zeros((n_prop, n_all, 2, 2, 2, 2))
    bpt = np.zeros((n_prop, n_all, 2, 2))
    btt = np.zeros((n_prop, n_all))

    def bval(fa: PairField, fb: PairField) -> float:
        if tables is not None:
            return tables.bvalue(fa, fb)
        return _dense_bvalue(model, fa, fb, quad)

    for jf, J in enumerate(fams):
        for lf, L in enumerate(all_fams):
            psis = {}
            for rj in J.records:
                for rl in L.records:
                    psis[(rj.s, rl.s)] = PairField(rj, rl, PSI)
            theta = None
            if J.multiplicity == 2 and L.multiplicity == 2:
                theta = PairField(J.records[1], L.records[1], THETA)
            for (s, q), fa in psis.items():
                for (s2, q2), fb in psis.items():
                    if (s2, q2) < (s, q):
                        continue
                    v = bval(fa, fb)
                    bpp[jf, lf, s - 1, q - 1, s2 - 1, q2 - 1] = v
                    bpp[jf, lf, s2 - 1, q2 - 1, s - 1, q - 1] = v
                if theta is not None:
                    bpt[jf, lf, s - 1, q - 1] = bval(fa, theta)
            if theta is not None:
                btt[jf, lf] = bval(theta, theta)

    return CouplingTensor(
        geometry=basis.geometry,
        n_prop=n_prop,
        n_ev=len(evs),
        mult=np.array([f.multiplicity for f in all_fams], dtype=np.int64),
        lam=np.array([f.lam for f in all_fams]),
        beta=np.array([f.beta for f in all_fams]),
        j1=np.array([f.j1 for f in all_fams], dtype=np.int64),
        j2=np.array([f.j2 for f in all_fams], dtype=np.int64),
        bpp=bpp,
        bpt=bpt,
        btt=btt,
        content_hash=_content_hash(
            basis.geometry, model, len(evs), tables.n_nodes if tables else len(quad.x1)
        ),
        meta={
            "n_nodes": tables.n_nodes if tables else len(quad.x1),
            "kind": model.kind,
            "ell": model.ell,
        },
        _tables=tables,
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_tensor(tensor: CouplingTensor, path) -> None:
    header = {
        "format_version": TENSOR_FORMAT_VERSION,
        "content_hash": tensor.content_hash,
        "L1": tensor.geometry.L1,
        "L2": tensor.geometry.L2,
        "k": tensor.geometry.k,
        "n_prop": tensor.n_prop,
        "n_ev": tensor.n_ev,
        "meta": tensor.meta,
    }
    np.savez(
        path,
        header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
        mult=tensor.mult,
        lam=tensor.lam,
        beta=tensor.beta,
        j1=tensor.j1,
        j2=tensor.j2,
        bpp=tensor.bpp,
        bpt=tensor.bpt,
        btt=tensor.btt,
    )


def load_tensor(path) -> CouplingTensor:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"].tobytes()).decode())
        if header["format_version"] != TENSOR_FORMAT_VERSION:
            raise ValueError(f"unsupported tensor format {header['format_version']}")
        geom = Geometry(header["L1"], header["L2"], header["k"])
        return CouplingTensor(
            geometry=geom,
            n_prop=int(header["n_prop"]),
            n_ev=int(header["n_ev"]),
            mult=data["mult"].copy(),
            lam=data["lam"].copy(),
            beta=data["beta"].copy(),
            j1=data["j1"].copy(),
            j2=data["j2"].copy(),
            bpp=data["bpp"].copy(),
            bpt=data["bpt"].copy(),
            btt=data["btt"].copy(),
            content_hash=header["content_hash"],
            meta=header.get("meta", {}),
        )


def export_tensor_csv(tensor: CouplingTensor, path) -> None:
    """Flat CSV of all stored B-values, for inspection."""
    with open(path, "w", newline="") as fh:
        fh.write("jf,lf,j1,j2,l1,l2,kindA,sA,qA,kindB,sB,qB,value\n")
        for jf in range(tensor.n_prop):
            for lf in range(tensor.n_all):
                mj = tensor.mult[jf]
                ml = tensor.mult[lf]
                base = (
                    f"{jf},{lf},{tensor.j1[jf]},{tensor.j2[jf]},"
                    f"{tensor.j1[lf]},{tensor.j2[lf]}"
                )
                for s in range(mj):
                    for q in range(ml):
                        for s2 in range(mj):
                            for q2 in range(ml):
                                v = tensor.bpp[jf, lf, s, q, s2, q2]
                                fh.write(f"{base},PSI,{s+1},{q+1},PSI,{s2+1},{q2+1},{v:.17g}\n")
                if mj == 2 and ml == 2:
                    for s in range(mj):
                        for q in range(ml):
                            v = tensor.bpt[jf, lf, s, q]
                            fh.write(f"{base},PSI,{s+1},{q+1},THETA,2,2,{v:.17g}\n")
                    fh.write(f"{base},THETA,2,2,THETA,2,2,{tensor.btt[jf, lf]:.17g}\n")
