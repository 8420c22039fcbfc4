"""Energy transport between modes and the equipartition state.

The mean power matrices ``P_j(Z) = E{A_j (x) conj(A_j)}`` obey a linear
autonomous system

    dP_j/dZ = Q_j P_j + P_j Q_j^* + sum_l gain_{jl}(P_l),

treated here as one real operator on the product space of Hermitian
blocks (dimension D = sum of multiplicity^2).  Its spectrum is real and
nonpositive; the kernel element intersected with the cone of
positive-semidefinite blocks is the equipartition state, and the
smallest-magnitude nonzero eigenvalue sets the equipartition distance
``L_eq = 1/|lambda_gap|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .coupling import CouplingTensor
from .medium import CovarianceModel
from .modes import TM, ModeBasis
from .moments import ModeMoments, maa_coefficients

_SQ2 = 1.0 / math.sqrt(2.0)

KERNEL_TOL = 1e-10


def hermitian_basis(mult: int) -> list[np.ndarray]:
    """Orthonormal basis (trace inner product) of mult x mult Hermitian matrices."""
    if mult == 1:
        return [np.array([[1.0]], dtype=complex)]
    return [
        np.array([[1, 0], [0, 0]], dtype=complex),
        np.array([[0, 0], [0, 1]], dtype=complex),
        np.array([[0, _SQ2], [_SQ2, 0]], dtype=complex),
        np.array([[0, 1j * _SQ2], [-1j * _SQ2, 0]], dtype=complex),
    ]


@dataclass
class HermitianIndex:
    """Coordinate map between stacked Hermitian blocks and R^D."""

    mults: list[int]
    offsets: list[int] = field(init=False)
    dim: int = field(init=False)
    bases: list[list[np.ndarray]] = field(init=False)

    def __post_init__(self) -> None:
        self.offsets = []
        off = 0
        for m in self.mults:
            self.offsets.append(off)
            off += m * m
        self.dim = off
        self.bases = [hermitian_basis(m) for m in self.mults]

    def to_vector(self, blocks: list[np.ndarray]) -> np.ndarray:
        v = np.zeros(self.dim)
        for j, (B, basis) in enumerate(zip(blocks, self.bases)):
            off = self.offsets[j]
            for a, E in enumerate(basis):
                v[off + a] = np.trace(B @ E.conj().T).real
        return v

    def to_blocks(self, v: np.ndarray) -> list[np.ndarray]:
        out = []
        for j, basis in enumerate(self.bases):
            off = self.offsets[j]
            B = np.zeros_like(basis[0])
            for a, E in enumerate(basis):
                B = B + v[off + a] * E
            out.append(B)
        return out

    def identity_vector(self) -> np.ndarray:
        return self.to_vector([np.eye(m, dtype=complex) for m in self.mults])


@dataclass
class TransportOperator:
    basis: ModeBasis
    index: HermitianIndex
    matrix: np.ndarray  # real D x D
    gain: list[list[np.ndarray]]  # gain[j][l] with axes (s, q, s', q')
    q_blocks: list[np.ndarray]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def gain_apply(self, jf: int, lf: int, U: np.ndarray) -> np.ndarray:
        """PSD-preserving gain map from block l into block j."""
        return np.einsum("sqtr,qr->st", self.gain[jf][lf], U)

    def apply_blocks(self, blocks: list[np.ndarray]) -> list[np.ndarray]:
        return self.index.to_blocks(self.matrix @ self.index.to_vector(blocks))


@dataclass
class SpectralResult:
    """Spectrum of the transport operator and derived equipartition data.

    ``L_eq`` uses the smallest-magnitude nonzero eigenvalue of the full
    operator (which includes slowly relaxing polarization coherences);
    ``L_eq_energy`` restricts to the population sector (the
    nonnegative-matrix block the equipartition argument is built on) and
    measures when the energy distribution forgets the source.
    """

    eigenvalues: np.ndarray  # real, sorted ascending by magnitude
    U_o: list[np.ndarray]
    lambda_gap: float
    m_gap: int
    L_eq: float
    lambda_gap_energy: float
    L_eq_energy: float
    kernel_dim: int
    clip_diagnostic: float


@dataclass
class PowerTrajectory:
    Z_grid: np.ndarray
    states: list[list[np.ndarray]]

    def total_trace(self, iz: int) -> float:
        return float(sum(np.trace(B).real for B in self.states[iz]))


def assemble_transport(
    basis: ModeBasis,
    tensor: CouplingTensor,
    model: CovarianceModel,
    moments: ModeMoments,
    loss: str = "hermitian",
) -> TransportOperator:
    """Build the D x D real representation of the transport operator.

    The (j, l) gain block is the Gram of the combined coupling fields
    ``(cPsi - delta*cA) Psi + cTheta Theta`` (delta = beta_l - beta_j)
    under the transverse kernel, times the full-line transform of g at
    delta -- the same covariance reduction used for the C blocks, applied
    as a two-sided sandwich.  Loss blocks are the anticommutator with Q_l.

    ``loss="hermitian"`` (default) uses the Hermitian part of Q_l, i.e.
    -C_l/2: this is the operator whose spectrum is provably real and the
    one the equipartition analysis works with.  ``loss="full"`` keeps the
    phase (anti-Hermitian) part too; it rotates polarization coherences
    and produces complex-conjugate eigenvalue pairs.
    """
    if loss not in ("hermitian", "full"):
        raise ValueError("loss must be 'hermitian' or 'full'")
    if tensor.n_prop != len(basis.families):
        raise ValueError("tensor does not cover the propagating families of this basis")
    if len(moments.blocks) != len(basis.families):
        raise ValueError("moments do not match the basis")

    k = basis.geometry.k
    zspec = model.spectrum()
    sigma2 = model.sigma2
    n = len(basis.families)
    mults = [f.multiplicity for f in basis.families]
    index = HermitianIndex(mults)

    gain: list[list[np.ndarray]] = [[None] * n for _ in range(n)]
    for jf, famj in enumerate(basis.families):
        mj = famj.multiplicity
        for lf, faml in enumerate(basis.families):
            ml = faml.multiplicity
            delta = faml.beta - famj.beta
            ghat = float(np.real(zspec.g_hat(delta)))
            wpsi = np.zeros((mj, ml))
            wth = np.zeros((mj, ml))
            for s in range(1, mj + 1):
                for q in range(1, ml + 1):
                    cA, cP, cT = maa_coefficients(
                        k, famj.lam, famj.beta, s, faml.lam, faml.beta, q
                    )
                    wpsi[s - 1, q - 1] = cP - delta * cA
                    if s == TM and q == TM:
                        wth[s - 1, q - 1] = cT
            H = np.einsum("sq,tr,sqtr->sqtr", wpsi, wpsi, tensor.bpp[jf, lf, :mj, :ml, :mj, :ml])
            if mj == 2 and ml == 2:
                bpt = tensor.bpt[jf, lf]
                H += np.einsum("sq,tr->sqtr", wpsi * bpt, wth)
                H += np.einsum("sq,tr->sqtr", wth, wpsi * bpt)
                H += np.einsum("sq,tr->sqtr", wth, wth) * tensor.btt[jf, lf]
            gain[jf][lf] = 0.25 * sigma2 * ghat * H

    if loss == "hermitian":
        qb = [0.5 * (b.Q + b.Q.conj().T) for b in moments.blocks]
    else:
        qb = [b.Q for b in moments.blocks]
    D = index.dim
    mat = np.zeros((D, D))
    for lf in range(n):
        off_l = index.offsets[lf]
        for a, E in enumerate(index.bases[lf]):
            img = [np.zeros((m, m), dtype=complex) for m in mults]
            for jf in range(n):
                img[jf] = img[jf] + np.einsum("sqtr,qr->st", gain[jf][lf], E)
            img[lf] = img[lf] + qb[lf] @ E + E @ qb[lf].conj().T
            mat[:, off_l + a] = index.to_vector(img)
    return TransportOperator(basis=basis, index=index, matrix=mat, gain=gain, q_blocks=qb)


def spectrum(op: TransportOperator, kernel_tol: float = KERNEL_TOL) -> SpectralResult:
    """Eigen decomposition, kernel state and equipartition distance.

    Raises if the kernel is empty; warns if it has dimension > 1 (the
    positive-flux condition between every mode pair may fail for such a
    medium).
    """
    vals, vecs = np.linalg.eig(op.matrix)
    scale = np.abs(vals).max()
    order = np.argsort(np.abs(vals))
    vals = vals[order]
    vecs = vecs[:, order]

    kernel_mask = np.abs(vals) <= kernel_tol * scale
    kernel_dim = int(kernel_mask.sum())
    if kernel_dim == 0:
        raise RuntimeError("transport operator has an empty kernel")
    if kernel_dim > 1:
        warnings.warn(
            f"transport kernel has dimension {kernel_dim}; the medium may not "
            "exchange energy between every mode pair",
            stacklevel=2,
        )

    nonzero = np.abs(vals)[~kernel_mask]
    lam_gap = float(nonzero.min())
    m_gap = int(np.sum(np.abs(nonzero - lam_gap) <= 1e-8 * scale))

    # population (diagonal) sector: Galerkin restriction to the E1/E2
    # coordinates, the nonnegative-matrix block of the equipartition proof
    diag_coords = []
    for jf, m in enumerate(op.index.mults):
        off = op.index.offsets[jf]
        diag_coords.extend(range(off, off + m))
    sub = op.matrix[np.ix_(diag_coords, diag_coords)]
    dvals = np.abs(np.linalg.eigvals(sub))
    dvals.sort()
    lam_gap_energy = float(dvals[1]) if len(dvals) > 1 else lam_gap

    u = np.real(vecs[:, 0])
    blocks = op.index.to_blocks(u)
    total = sum(np.trace(B).real for B in blocks)
    if total < 0:
        blocks = [-B for B in blocks]
        total = -total
    clip = 0.0
    cleaned = []
    for B in blocks:
        B = 0.5 * (B + B.conj().T)
        w, V = np.linalg.eigh(B)
        neg = w[w < 0]
        if neg.size:
            worst = float(-neg.min())
            if worst > 1e-12 * max(total, 1e-300):
                warnings.warn(
                    f"kernel state block clipped by {worst:.3e} (relative to trace)",
                    stacklevel=2,
                )
            clip = max(clip, worst)
            w = np.clip(w, 0.0, None)
            B = (V * w) @ V.conj().T
        cleaned.append(B)
    total = sum(np.trace(B).real for B in cleaned)
    cleaned = [B / total for B in cleaned]

    lam_signed = np.real(vals)
    return SpectralResult(
        eigenvalues=lam_signed,
        U_o=cleaned,
        lambda_gap=lam_gap,
        m_gap=m_gap,
        L_eq=1.0 / lam_gap,
        lambda_gap_energy=lam_gap_energy,
        L_eq_energy=1.0 / lam_gap_energy,
        kernel_dim=kernel_dim,
        clip_diagnostic=clip,
    )


def integrate_power(
    op: TransportOperator,
    P_o: list[np.ndarray],
    Z_grid: np.ndarray,
    psd_tol: float = 1e-8,
) -> PowerTrajectory:
    """Propagate the power blocks by the exact matrix exponential.

    Uses the eigen decomposition of the operator (RK4 exists as a
    diagnostic fallback, see :func:`integrate_power_rk4`).  PSD and total
    trace are verified at every grid point, never projected.
    """
    Z_grid = np.asarray(Z_grid, dtype=float)
    if Z_grid.ndim != 1 or Z_grid[0] < 0 or np.any(np.diff(Z_grid) < 0):
        raise ValueError("Z_grid must be ascending and start at Z >= 0")
    v0 = op.index.to_vector(P_o)
    vals, vecs = np.linalg.eig(op.matrix)
    try:
        coeff = np.linalg.solve(vecs, v0.astype(complex))
        cond = np.linalg.cond(vecs)
    except np.linalg.LinAlgError:
        cond = np.inf
    use_eig = np.isfinite(cond) and cond < 1e10

    states = []
    trace0 = float(sum(np.trace(B).real for B in P_o))
    for Z in Z_grid:
        if use_eig:
            v = np.real(vecs @ (np.exp(vals * Z) * coeff))
        else:
            from scipy.linalg import expm

            v = expm(op.matrix * Z) @ v0
        blocks = [0.5 * (B + B.conj().T) for B in op.index.to_blocks(v)]
        scale = max(trace0, 1e-300)
        for jf, B in enumerate(blocks):
            wmin = float(np.linalg.eigvalsh(B).min())
            if wmin < -psd_tol * scale:
                raise RuntimeError(
                    f"power block {jf} leaves the PSD cone at Z={Z} (min eig {wmin:.3e})"
                )
        states.append(blocks)
    return PowerTrajectory(Z_grid=Z_grid, states=states)


def integrate_power_rk4(
    op: TransportOperator,
    P_o: list[np.ndarray],
    Z_grid: np.ndarray,
    dZ: float | None = None,
) -> PowerTrajectory:
    """RK4 reference integration, for conditioning diagnostics in tests."""
    Z_grid = np.asarray(Z_grid, dtype=float)
    if dZ is None:
        dZ = max(Z_grid[-1], 1e-6) / 4000.0
    v = op.index.to_vector(P_o)
    A = op.matrix
    states = []
    z = 0.0
    for Z in Z_grid:
        while z < Z - 1e-15:
            h = min(dZ, Z - z)
            k1 = A @ v
            k2 = A @ (v + 0.5 * h * k1)
            k3 = A @ (v + 0.5 * h * k2)
            k4 = A @ (v + h * k3)
            v = v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            z += h
        states.append([0.5 * (B + B.conj().T) for B in op.index.to_blocks(v)])
    return PowerTrajectory(Z_grid=Z_grid, states=states)


def depolarization_report(traj: PowerTrajectory, basis: ModeBasis) -> list[dict]:
    """TE/TM power split and degree of polarization per mode and range."""
    rows = []
    for iz, Z in enumerate(traj.Z_grid):
        for jf, fam in enumerate(basis.families):
            B = traj.states[iz][jf]
            p11 = float(B[0, 0].real)
            p22 = float(B[1, 1].real) if fam.multiplicity == 2 else 0.0
            tr = p11 + p22
            dop = abs(p11 - p22) / tr if tr > 0 else 0.0
            rows.append(
                {
                    "Z": float(Z),
                    "j": jf + 1,
                    "j1": fam.j1,
                    "j2": fam.j2,
                    "p_te": p11,
                    "p_tm": p22,
                    "degree_of_polarization": dop,
                }
            )
    return rows
