"""Command-line pipelines and artifact emission.

Configuration is a single INI file (sections/keys documented in the
README); every run writes ``summary.json`` with the resolved
configuration, its hash, package version and timings, so figure-level
outputs are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import montecarlo as mc
from .coupling import assemble_coupling_tensor, export_tensor_csv, load_tensor, save_tensor
from .medium import CUSTOM, GAUSSIAN, CovarianceModel
from .modes import Geometry, QuadratureGrid, SourceSpec, enumerate_modes, eval_mode, project_source
from .moments import compute_moments, mean_amplitude_evolution, scattering_mean_free_paths
from .transport import assemble_transport, depolarization_report, integrate_power, spectrum

PAPER_GEOMETRIES = {1: (3.03, 5.84), 2: (4.08, 5.77)}

DEFAULTS = {
    "geometry": {"L1": "3.03", "L2": "5.84", "k": str(2.0 * math.pi)},
    "covariance": {"kind": "gaussian-isotropic", "ell": "1.0", "sigma2": "1.0"},
    "quadrature": {"order_factor": "4", "order_pad": "8"},
    "evanescent": {"enabled": "true", "n_ev": "auto"},
    "source": {"preset": "single-mode", "j": "1", "s": "1", "amplitude": "1.0"},
    "transport": {"z_max": "auto", "n_z": "61", "kappa": "true"},
    "montecarlo": {
        "epsilon": "0.05",
        "realizations": "10000",
        "seed": "7",
        "checkpoints": "0.1,0.25,0.5,1.0",
        "dz": "auto",
    },
    "output": {"directory": "out"},
}


class ConfigError(Exception):
    pass


def load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.read_dict(DEFAULTS)
    if path is not None:
        read = cp.read(path)
        if not read:
            raise ConfigError(f"config file not readable: {path}")
    return cp


def resolved_dict(cp: configparser.ConfigParser) -> dict:
    return {s: dict(cp[s]) for s in cp.sections()}


def config_hash(cp: configparser.ConfigParser) -> str:
    return hashlib.sha256(json.dumps(resolved_dict(cp), sort_keys=True).encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _geometry(cp) -> Geometry:
    g = cp["geometry"]
    try:
        return Geometry(g.getfloat("L1"), g.getfloat("L2"), g.getfloat("k"))
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def _model(cp) -> CovarianceModel:
    c = cp["covariance"]
    kind = c.get("kind")
    if kind in ("gaussian", "gaussian-isotropic"):
        kind = GAUSSIAN
    elif kind == "custom-separable":
        raise ConfigError("covariance: custom-separable kernels need the library API")
    else:
        raise ConfigError(f"covariance.kind: unknown kind {kind!r}")
    ell = c.getfloat("ell")
    sigma2 = c.getfloat("sigma2")
    if ell <= 0 or sigma2 < 0:
        raise ConfigError("covariance: ell must be > 0 and sigma2 >= 0")
    return CovarianceModel(kind=kind, ell=ell, sigma2=sigma2)


def converged_n_ev(geom: Geometry, model: CovarianceModel, start: int = 16, max_n: int = 256) -> int:
    """Smallest evanescent count whose kappa entries move < 1% on doubling."""
    from .moments import compute_kappa

    n = start
    prev = None
    while n <= max_n:
        basis = enumerate_modes(geom, n_evanescent=n)
        tensor = assemble_coupling_tensor(basis, model, include_evanescent=True)
        kap, _, _ = compute_kappa(basis, tensor, model)
        flat = np.concatenate([k.ravel() for k in kap])
        if prev is not None:
            scale = max(np.abs(flat).max(), 1e-300)
            if np.abs(flat - prev).max() <= 0.01 * scale:
                return n // 2
        prev = flat
        n *= 2
    warnings.warn(f"kappa not converged at n_ev={max_n}; using it anyway", stacklevel=2)
    return max_n


def _n_ev(cp, geom, model) -> int:
    ev = cp["evanescent"]
    if not ev.getboolean("enabled"):
        return 0
    raw = ev.get("n_ev")
    if raw == "auto":
        return converged_n_ev(geom, model)
    n = int(raw)
    if n < 0:
        raise ConfigError("evanescent.n_ev must be >= 0 or 'auto'")
    return n


def _source_amplitudes(cp, basis) -> np.ndarray:
    src = cp["source"]
    preset = src.get("preset")
    d = len(basis.propagating)
    amp = src.getfloat("amplitude")
    A = np.zeros(d, dtype=complex)
    if preset == "single-mode":
        jfam = src.getint("j") - 1
        s = src.getint("s")
        if not (0 <= jfam < len(basis.families)):
            raise ConfigError(f"source.j = {jfam + 1} outside 1..{len(basis.families)}")
        fam = basis.families[jfam]
        if s not in (1, 2) or s > fam.multiplicity:
            raise ConfigError(f"source.s = {s} not available for mode ({fam.j1},{fam.j2})")
        A[basis.index_of(fam.j1, fam.j2, s)] = amp
    elif preset == "uniform":
        A[:] = amp / math.sqrt(d)
    elif preset == "mode-current":
        # transverse current proportional to one eigenmode, projected
        jfam = src.getint("j") - 1
        s = src.getint("s")
        fam = basis.families[jfam]
        rec = [r for r in fam.records if r.s == s][0]
        quad = QuadratureGrid.for_basis(basis)
        spec = SourceSpec(J=lambda x1, x2: amp * eval_mode(rec, basis.geometry, x1, x2))
        A = project_source(basis, spec, quad).A
    elif preset == "amplitude-file":
        path = src.get("file")
        if not path or not Path(path).exists():
            raise ConfigError("source.file missing for amplitude-file preset")
        with open(path) as fh:
            next(fh)
            for line in fh:
                j1, j2, s, re, im = line.strip().split(",")
                A[basis.index_of(int(j1), int(j2), int(s))] = float(re) + 1j * float(im)
    else:
        raise ConfigError(f"source.preset: unknown preset {preset!r}")
    return A


def _tensor(cp, basis, model, out: Path, no_assemble: bool, n_ev: int):
    cache_dir = out / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    from .coupling import _content_hash, _tables_for

    tables = _tables_for(basis, model)
    key = _content_hash(basis.geometry, model, n_ev, tables.n_nodes)
    cache = cache_dir / f"tensor_{key}.npz"
    if cache.exists():
        tensor = load_tensor(cache)
        tensor._tables = tables
        return tensor, True
    if no_assemble:
        raise ConfigError(f"--no-assemble given but tensor cache {cache} is missing")
    tensor = assemble_coupling_tensor(
        basis, model, include_evanescent=n_ev > 0, n_ev=n_ev if n_ev > 0 else None
    )
    save_tensor(tensor, cache)
    return tensor, False


def _block_vector(basis, A):
    out = []
    off = 0
    for f in basis.families:
        m = f.multiplicity
        a = A[off : off + m]
        out.append(np.outer(a, a.conj()))
        off += m
    return out


# ---------------------------------------------------------------------------
# subcommand pipelines
# ---------------------------------------------------------------------------


def cmd_modes(cp, out: Path, args) -> dict:
    geom = _geometry(cp)
    model = _model(cp)
    n_ev = _n_ev(cp, geom, model)
    basis = enumerate_modes(geom, n_evanescent=n_ev)
    rows = [
        [r["j1"], r["j2"], r["s"], r["lambda"], r["beta"], r["kind"], r["alpha"]]
        for r in basis.table_rows()
    ]
    write_csv(out / "modes.csv", ["j1", "j2", "s", "lambda", "beta", "kind", "alpha"], rows)
    return {"N": basis.n_propagating, "n_amplitudes": basis.n_amplitudes, "n_evanescent": n_ev}


def _moments_pipeline(cp, out: Path, args):
    geom = _geometry(cp)
    model = _model(cp)
    n_ev = _n_ev(cp, geom, model)
    basis = enumerate_modes(geom, n_evanescent=n_ev)
    tensor, cached = _tensor(cp, basis, model, out, args.no_assemble, n_ev)
    include_kappa = cp["transport"].getboolean("kappa")
    mom = compute_moments(basis, tensor, model, include_kappa=include_kappa)
    mfp = scattering_mean_free_paths([b.C for b in mom.blocks])
    return geom, model, basis, tensor, mom, mfp, cached


def cmd_moments(cp, out: Path, args) -> dict:
    geom, model, basis, tensor, mom, mfp, cached = _moments_pipeline(cp, out, args)
    rows = []
    for jf, fam in enumerate(basis.families):
        mu2 = mfp.mu[jf, 1] if fam.multiplicity == 2 else float("nan")
        rows.append([jf + 1, fam.j1, fam.j2, mfp.mu[jf, 0], mu2, mfp.S[jf]])
    write_csv(out / "mean_free_paths.csv", ["j", "j1", "j2", "mu1", "mu2", "S_j"], rows)

    qr, cr = [], []
    for jf, blk in enumerate(mom.blocks):
        m = blk.family.multiplicity
        for s in range(m):
            for s2 in range(m):
                base = [jf + 1, blk.family.j1, blk.family.j2, s + 1, s2 + 1]
                qr.append(base + [blk.Q[s, s2].real, blk.Q[s, s2].imag])
                cr.append(base + [blk.C[s, s2].real, blk.C[s, s2].imag])
    hdr = ["j", "j1", "j2", "s", "sp", "re", "im"]
    write_csv(out / "moments_Qj.csv", hdr, qr)
    write_csv(out / "moments_Cj.csv", hdr, cr)

    A0 = _source_amplitudes(cp, basis)
    Zmax = cp["transport"].get("z_max")
    if Zmax == "auto":
        Zmax_val = 3.0 * float(mfp.S.max())
    else:
        Zmax_val = float(Zmax)
    Z = np.linspace(0.0, Zmax_val, cp["transport"].getint("n_z"))
    traj = mean_amplitude_evolution([b.Q for b in mom.blocks], A0, Z, basis)
    rows = []
    for iz, Zv in enumerate(Z):
        for i, rec in enumerate(basis.propagating):
            rows.append([Zv, rec.j1, rec.j2, rec.s, traj[iz, i].real, traj[iz, i].imag])
    write_csv(out / "mean_amplitudes.csv", ["Z", "j1", "j2", "s", "re", "im"], rows)
    export_tensor_csv(tensor, out / "coupling_tensor.csv")
    return {
        "N": basis.n_propagating,
        "tensor_cached": cached,
        "max_S": float(mfp.S.max()),
        "min_S": float(mfp.S.min()),
        "max_anomaly": max(b.anomaly for b in mom.blocks),
    }


def _transport_pipeline(cp, out: Path, args):
    geom, model, basis, tensor, mom, mfp, cached = _moments_pipeline(cp, out, args)
    op = assemble_transport(basis, tensor, model, mom)
    sp = spectrum(op)
    return geom, model, basis, tensor, mom, mfp, op, sp


def cmd_transport(cp, out: Path, args) -> dict:
    geom, model, basis, tensor, mom, mfp, op, sp = _transport_pipeline(cp, out, args)
    write_csv(
        out / "transport_spectrum.csv",
        ["index", "eigenvalue"],
        [[i, v] for i, v in enumerate(sp.eigenvalues)],
    )
    _write_equipartition(out, basis, sp)

    A0 = _source_amplitudes(cp, basis)
    Zmax = cp["transport"].get("z_max")
    Zmax_val = 3.0 * sp.L_eq if Zmax == "auto" else float(Zmax)
    Z = np.linspace(0.0, Zmax_val, cp["transport"].getint("n_z"))
    traj = integrate_power(op, _block_vector(basis, A0), Z)
    rows = []
    for iz, Zv in enumerate(Z):
        for jf, fam in enumerate(basis.families):
            B = traj.states[iz][jf]
            for s in range(fam.multiplicity):
                for s2 in range(fam.multiplicity):
                    rows.append(
                        [Zv, jf + 1, s + 1, s2 + 1, B[s, s2].real, B[s, s2].imag]
                    )
    write_csv(out / "power_trajectory.csv", ["Z", "j", "s", "sp", "re", "im"], rows)
    write_csv(
        out / "depolarization.csv",
        ["Z", "j", "j1", "j2", "p_te", "p_tm", "degree_of_polarization"],
        [
            [r["Z"], r["j"], r["j1"], r["j2"], r["p_te"], r["p_tm"], r["degree_of_polarization"]]
            for r in depolarization_report(traj, basis)
        ],
    )
    return {
        "N": basis.n_propagating,
        "L_eq": sp.L_eq,
        "L_eq_energy": sp.L_eq_energy,
        "max_S": float(mfp.S.max()),
        "ratio_L_eq_to_max_S": sp.L_eq_energy / float(mfp.S.max()),
        "kernel_dim": sp.kernel_dim,
        "trace_drift": max(abs(traj.total_trace(i) - traj.total_trace(0)) for i in range(len(Z))),
    }


def _write_equipartition(out: Path, basis, sp) -> None:
    rows = []
    for jf, fam in enumerate(basis.families):
        B = sp.U_o[jf]
        for s in range(fam.multiplicity):
            for s2 in range(fam.multiplicity):
                rows.append([jf + 1, s + 1, s2 + 1, B[s, s2].real, B[s, s2].imag])
    write_csv(out / "equipartition.csv", ["j", "s", "sp", "re", "im"], rows)


def cmd_equipartition(cp, out: Path, args) -> dict:
    geom, model, basis, tensor, mom, mfp, op, sp = _transport_pipeline(cp, out, args)
    _write_equipartition(out, basis, sp)
    write_csv(
        out / "transport_spectrum.csv",
        ["index", "eigenvalue"],
        [[i, v] for i, v in enumerate(sp.eigenvalues)],
    )
    offd = math.sqrt(sum(np.linalg.norm(B - np.diag(np.diag(B))) ** 2 for B in sp.U_o))
    diag = math.sqrt(sum(np.linalg.norm(np.diag(np.diag(B))) ** 2 for B in sp.U_o))
    return {
        "N": basis.n_propagating,
        "L_eq": sp.L_eq,
        "L_eq_energy": sp.L_eq_energy,
        "lambda_gap": sp.lambda_gap,
        "gap_multiplicity": sp.m_gap,
        "kernel_dim": sp.kernel_dim,
        "offdiag_fraction": offd / diag,
    }


def cmd_montecarlo(cp, out: Path, args) -> dict:
    geom = _geometry(cp)
    model = _model(cp)
    basis = enumerate_modes(geom, n_evanescent=0)
    tensor, cached = _tensor(cp, basis, model, out, args.no_assemble, 0)
    # kappa-free, raw-drift moments: the sampled dynamics excludes the
    # order-eps^2 evanescent feedback, so its own limit matrices apply
    mom = compute_moments(basis, tensor, model, include_kappa=False, enforce_conservation=False)
    mfp = scattering_mean_free_paths([b.C for b in mom.blocks])

    sec = cp["montecarlo"]
    eps = sec.getfloat("epsilon")
    seed = args.seed if args.seed is not None else sec.getint("seed")
    nreal = sec.getint("realizations")
    factors = [float(x) for x in sec.get("checkpoints").split(",")]
    Zc = np.array([0.0] + [f * float(mfp.S.min()) for f in factors])
    dz = None if sec.get("dz") == "auto" else sec.getfloat("dz")
    A0 = _source_amplitudes(cp, basis)
    cfg = mc.MCConfig(
        epsilon=eps,
        Z_checkpoints=Zc,
        n_realizations=nreal,
        rng_seed=seed,
        A_o=A0,
        dz_solver=dz,
    )
    res = mc.run_ensemble(basis, tensor, model, cfg, threads=args.threads)

    pred_A = mean_amplitude_evolution([b.Q_raw for b in mom.blocks], A0, res.Z, basis)
    op = assemble_transport(basis, tensor, model, mom)
    traj = integrate_power(op, _block_vector(basis, A0), res.Z)
    rep = mc.estimate_and_compare(res, basis, pred_A, traj.states, eps, model.sigma2)

    rows = []
    for ic, Z in enumerate(res.Z):
        for i, rec in enumerate(basis.propagating):
            rows.append(
                [
                    Z,
                    rec.j1,
                    rec.j2,
                    rec.s,
                    res.mean_A[ic, i].real,
                    res.mean_A[ic, i].imag,
                    res.se_A_re[ic, i],
                    res.se_A_im[ic, i],
                    pred_A[ic, i].real,
                    pred_A[ic, i].imag,
                ]
            )
    write_csv(
        out / "mc_mean_amplitudes.csv",
        ["Z", "j1", "j2", "s", "re", "im", "se_re", "se_im", "pred_re", "pred_im"],
        rows,
    )
    rows = []
    for ic, Z in enumerate(res.Z):
        for jf, (off, m, foff) in enumerate(res.block_slices):
            P = res.power_block(ic, jf)
            Pp = traj.states[ic][jf]
            for s in range(m):
                for s2 in range(m):
                    e = s * m + s2
                    rows.append(
                        [
                            Z,
                            jf + 1,
                            s + 1,
                            s2 + 1,
                            P[s, s2].real,
                            P[s, s2].imag,
                            res.se_P_re[ic, foff + e],
                            res.se_P_im[ic, foff + e],
                            Pp[s, s2].real,
                            Pp[s, s2].imag,
                        ]
                    )
    write_csv(
        out / "mc_powers.csv",
        ["Z", "j", "s", "sp", "re", "im", "se_re", "se_im", "pred_re", "pred_im"],
        rows,
    )
    write_csv(
        out / "mc_comparison.csv",
        ["Z", "kind", "index", "part", "z", "gated"],
        [[r["Z"], r["kind"], r["index"], r["part"], r["z"], int(bool(r["gated"]))] for r in rep["rows"]],
    )
    return {
        "N": basis.n_propagating,
        "epsilon": eps,
        "realizations": nreal,
        "seed": seed,
        "max_abs_z": rep["max_abs_z"],
        "z_threshold": rep["z_threshold"],
        "energy_error": rep["energy_error"],
        "energy_drift_max_pathwise": res.energy_drift_max,
        "passed": bool(rep["passed"]),
    }


def cmd_reproduce_figures(cp, out: Path, args) -> dict:
    summary = {}
    for gid, (L1, L2) in PAPER_GEOMETRIES.items():
        sub = configparser.ConfigParser()
        sub.read_dict(resolved_dict(cp))
        sub["geometry"]["L1"] = str(L1)
        sub["geometry"]["L2"] = str(L2)
        sub["covariance"]["ell"] = "1.0"
        sub["covariance"]["sigma2"] = "1.0"
        geom, model, basis, tensor, mom, mfp, op, sp = _transport_pipeline(sub, out, args)
        rows = []
        for jf, fam in enumerate(basis.families):
            mu = mfp.mu[jf]
            mu_max = mu[1] if fam.multiplicity == 2 else mu[0]
            rows.append([jf + 1, fam.j1, fam.j2, mfp.S[jf], 1.0 / mu_max, sp.L_eq_energy])
        write_csv(
            out / f"coherent_geom{gid}.csv",
            ["j", "j1", "j2", "S_j", "inv_mu_max", "L_eq"],
            rows,
        )
        rows = []
        offset = 0
        for jf, fam in enumerate(basis.families):
            B = sp.U_o[jf] / max(np.max([np.max(np.abs(u)) for u in sp.U_o]), 1e-300)
            for s in range(fam.multiplicity):
                for s2 in range(fam.multiplicity):
                    rows.append([offset + s, offset + s2, B[s, s2].real, B[s, s2].imag])
            offset += fam.multiplicity
        write_csv(out / f"stationary_geom{gid}.csv", ["row", "col", "re", "im"], rows)
        summary[f"geometry{gid}"] = {
            "L1": L1,
            "L2": L2,
            "N": basis.n_propagating,
            "L_eq": sp.L_eq,
            "L_eq_energy": sp.L_eq_energy,
            "max_S": float(mfp.S.max()),
            "ratio": sp.L_eq_energy / float(mfp.S.max()),
        }
    return summary


COMMANDS = {
    "modes": cmd_modes,
    "moments": cmd_moments,
    "transport": cmd_transport,
    "equipartition": cmd_equipartition,
    "montecarlo": cmd_montecarlo,
    "reproduce-figures": cmd_reproduce_figures,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="randwg",
        description="Long-range statistics of electromagnetic modes in random waveguides",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--no-assemble", action="store_true", help="require a cached tensor")
    parser.add_argument("--seed", type=int, default=None, help="Monte Carlo seed override")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        cp = load_config(args.config)
        out = Path(args.out if args.out is not None else cp["output"]["directory"])
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cp, out, args)
    except (ConfigError, ValueError, KeyError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1

    summary = {
        "command": args.command,
        "version": __version__,
        "config": resolved_dict(cp),
        "config_hash": config_hash(cp),
        "seconds": time.time() - t0,
        "results": result,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary["results"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
