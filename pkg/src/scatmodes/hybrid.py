"""Coupling of the dipole backend with a sphere described only by its T-matrix.

A dipole cloud (controllable and background regions) surrounds a sphere
centred at the origin whose scattering enters exclusively through its
diagonal transition matrix.  The coupling operator U4 maps dipole
currents to regular-wave coefficients about the sphere centre; it is
assembled by quadrature projection of sampled dipole fields on a fit
sphere between the sphere surface and the nearest dipole, with the
projection residual reported per column.

The sphere plus the background dipoles together form the background.
Both the modified-impedance route (sphere folded into the impedance
matrix, then Schur-eliminated with the background dipoles) and the
scattering route (composite and background transition matrices from
hybrid solves) are provided; for lossless scenes they agree to the
projection accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import swe
from .dipoles import (
    BlockImpedance,
    DipoleScene,
    TransitionSet,
    assemble_impedance,
    dyadic_green,
)
from .exceptions import GeometryError, ResolutionError, SolveError
from .mie import SphereSpec, mie_tmatrix
from .modes import ModeSet, _mode_order, cm_scattering
from .network import OperatorMatrix
from .swe import WaveBasis


@dataclass(frozen=True)
class HybridScene:
    """Dipole scene around a T-matrix sphere at the global origin."""

    mom_scene: DipoleScene
    sphere: SphereSpec

    def __post_init__(self):
        if self.mom_scene.ground_plane or self.mom_scene.ports:
            raise GeometryError("hybrid scenes support neither ground planes nor ports")
        if self.clearance <= 0.0:
            raise GeometryError(
                f"all dipoles must lie strictly outside the sphere "
                f"(clearance {self.clearance:.4g} m)"
            )

    @property
    def min_dipole_radius(self) -> float:
        if self.mom_scene.n_dipoles == 0:
            return math.inf
        return float(np.min(np.linalg.norm(self.mom_scene.positions, axis=1)))

    @property
    def clearance(self) -> float:
        return self.min_dipole_radius - self.sphere.radius

    def default_r_fit(self) -> float:
        """Geometric mean of sphere radius and nearest dipole distance."""
        return math.sqrt(self.sphere.radius * self.min_dipole_radius)


def default_hybrid_basis(scene: HybridScene, k: float) -> WaveBasis:
    ka = k * max(scene.mom_scene.circumscribing_radius, scene.sphere.radius)
    return swe.basis(swe.truncation_order(ka))


def assemble_u4(scene: HybridScene, k: float, wave_basis: WaveBasis,
                r_fit: float | None = None, quad_margin: int = 8,
                residual_tol: float = 1e-6) -> OperatorMatrix:
    """Current-to-regular-wave coupling operator about the sphere centre.

    Column (p, axis) holds minus the regular-wave expansion coefficients
    of that dipole's field, sampled on a quadrature sphere of radius
    ``r_fit`` (sphere_radius < r_fit < nearest dipole) and projected with
    ``project_onto_regular``; the sign matches the outgoing readout
    convention ``f = -U1 I``.  ``meta['column_residuals']`` reports the
    per-column projection misfit; exceeding ``residual_tol`` raises.
    """
    scn = scene.mom_scene
    n = scn.n_dipoles
    if n == 0:
        return OperatorMatrix("projection", np.zeros((wave_basis.size, 0), dtype=complex),
                              wave_basis, meta={"column_residuals": np.zeros(0)})
    if r_fit is None:
        r_fit = scene.default_r_fit()
    if not scene.sphere.radius < r_fit < scene.min_dipole_radius:
        raise GeometryError(
            f"r_fit={r_fit:.4g} must lie between the sphere surface "
            f"({scene.sphere.radius:.4g}) and the nearest dipole "
            f"({scene.min_dipole_radius:.4g})"
        )

    l_max = wave_basis.l_max
    pts, w = swe.sphere_quadrature(l_max, radius=r_fit,
                                   polar_nodes=l_max + 1 + quad_margin,
                                   azimuth_nodes=2 * (l_max + quad_margin) + 1)
    # per-unit-current dipole fields at the grid, in incident-wave units
    g = dyadic_green(k, pts, scn.positions)        # (P, N, 3, 3)
    vals = (-1j / k) * g.transpose(0, 2, 1, 3).reshape(pts.shape[0], 3, 3 * n)
    table = swe.regular_wave_table(wave_basis, k, pts)
    coeffs, residuals = swe.project_onto_regular(pts, vals, w, k, wave_basis, table=table)
    if np.any(residuals > residual_tol):
        raise ResolutionError(
            f"U4 projection residual {residuals.max():.3e} exceeds {residual_tol:.1e}; "
            "increase the basis, the fit radius margin, or the clearance"
        )
    return OperatorMatrix("projection", -coeffs, wave_basis,
                          meta={"column_residuals": residuals, "r_fit": r_fit})


@dataclass
class HybridSystem:
    """Assembled hybrid operators shared by both solution routes."""

    blocks: BlockImpedance
    T_b1: OperatorMatrix
    U4: OperatorMatrix
    Z_mod: np.ndarray       # Z + U4^T T_b1 U4, background unknowns first
    U_mod: np.ndarray       # U1 + T_b1 U4 (complex), radiating readout
    basis: WaveBasis
    k: float


def assemble_hybrid(scene: HybridScene, k: float,
                    wave_basis: WaveBasis | None = None,
                    r_fit: float | None = None,
                    quad_margin: int = 8,
                    residual_tol: float = 1e-6) -> HybridSystem:
    """Impedance system of the dipole cloud with the sphere folded in."""
    if wave_basis is None:
        wave_basis = default_hybrid_basis(scene, k)
    blocks = assemble_impedance(scene.mom_scene, k, wave_basis)
    t_b1 = mie_tmatrix(scene.sphere, k, wave_basis)
    u4 = assemble_u4(scene, k, wave_basis, r_fit=r_fit, quad_margin=quad_margin,
                     residual_tol=residual_tol)
    u4_sys = u4.data[:, blocks.perm]
    tb1 = t_b1.data
    z_mod = blocks.Z + u4_sys.T @ tb1 @ u4_sys
    u_mod = blocks.U1 + tb1 @ u4_sys
    return HybridSystem(blocks=blocks, T_b1=t_b1,
                        U4=OperatorMatrix("projection", u4_sys, wave_basis,
                                          meta=u4.meta),
                        Z_mod=z_mod, U_mod=u_mod, basis=wave_basis, k=k)


def hybrid_transition(scene: HybridScene, k: float,
                      wave_basis: WaveBasis | None = None,
                      system: HybridSystem | None = None) -> TransitionSet:
    """Composite and background transition/scattering operators.

    The composite couples all dipoles with the sphere; the background
    keeps only the background dipoles plus the sphere.  Each column is
    the hybrid solve for one incident regular wave.
    """
    if system is None:
        system = assemble_hybrid(scene, k, wave_basis)
    dim = system.basis.size
    eye = np.eye(dim)
    nb = system.blocks.n_b
    tb1 = system.T_b1.data

    def _t_of(z, u):
        if z.shape[0] == 0:
            return tb1.copy()
        try:
            return tb1 - u @ la.solve(z, u.T)
        except la.LinAlgError as err:
            raise SolveError(f"hybrid system singular: {err}")

    t_full = _t_of(system.Z_mod, system.U_mod)
    t_bg = _t_of(system.Z_mod[:nb, :nb], system.U_mod[:, :nb])
    return TransitionSet(
        T=OperatorMatrix("T", t_full, system.basis),
        T_b=OperatorMatrix("T", t_bg, system.basis),
        S=OperatorMatrix("S", 2.0 * t_full + eye, system.basis),
        S_b=OperatorMatrix("S", 2.0 * t_bg + eye, system.basis),
        blocks=system.blocks,
    )


def hybrid_scattering_modes(scene: HybridScene, k: float,
                            wave_basis: WaveBasis | None = None,
                            system: HybridSystem | None = None) -> ModeSet:
    """Substructure modes from the hybrid scattering operators."""
    ts = hybrid_transition(scene, k, wave_basis, system=system)
    return cm_scattering(ts.S, ts.S_b, k=k)


def hybrid_impedance_modes(scene: HybridScene, k: float,
                           wave_basis: WaveBasis | None = None,
                           system: HybridSystem | None = None) -> ModeSet:
    """Substructure modes from the sphere-augmented impedance matrix.

    The sphere contribution ``U4^T T_b1 U4`` modifies the impedance
    matrix; the background-dipole block of the modified matrix is then
    Schur-eliminated and the real symmetric pencil of the compressed
    reactance against the compressed resistance is solved.
    """
    if system is None:
        system = assemble_hybrid(scene, k, wave_basis)
    nb = system.blocks.n_b
    nc = system.blocks.n_c
    diag = {"solver": "hybrid-eigh",
            "u4_residual": float(np.max(system.U4.meta["column_residuals"], initial=0.0))}
    if nc == 0:
        return ModeSet(s=np.zeros(0, dtype=complex), k=k, basis=system.basis,
                       diagnostics=diag)

    z = system.Z_mod
    u = system.U_mod
    if nb > 0:
        try:
            w = la.solve(z[:nb, :nb], z[:nb, nb:])
        except la.LinAlgError as err:
            raise SolveError(f"hybrid background block singular: {err}")
        z_t = z[nb:, nb:] - z[nb:, :nb] @ w
        u_t = u[:, nb:] - u[:, :nb] @ w
    else:
        w = np.zeros((0, nc))
        z_t = z[nb:, nb:]
        u_t = u[:, nb:]

    r_t = 0.5 * (z_t.real + z_t.real.T)
    x_t = 0.5 * (z_t.imag + z_t.imag.T)
    diag["schur_factorization_residual"] = float(
        np.linalg.norm(r_t - (u_t.conj().T @ u_t).real) / max(np.linalg.norm(r_t), 1e-300))
    from .modes import _radiation_condition
    diag["r_condition"] = _radiation_condition(r_t)
    try:
        lam, i_c = la.eigh(x_t, r_t)
        lam = lam.astype(complex)
        i_c = i_c.astype(complex)
    except la.LinAlgError:
        diag["solver"] = "hybrid-eig"
        lam, i_c = la.eig(x_t, r_t)
        norm = np.sqrt(np.einsum("in,ij,jn->n", i_c.conj(), r_t, i_c))
        i_c = i_c / norm[None, :]

    t_vals = -1.0 / (1.0 + 1j * lam)
    f = -u_t @ i_c
    f = f / np.linalg.norm(f, axis=0)[None, :]

    # a_n = S_b^H f_n with the hybrid background (background dipoles + sphere)
    tb1 = system.T_b1.data
    tbh_f = tb1.conj().T @ f
    if nb > 0:
        ub = u[:, :nb]
        tbh_f = tbh_f - ub.conj() @ la.solve(z[:nb, :nb].conj().T, ub.conj().T @ f)
    a = f + 2.0 * tbh_f

    i_b = -w @ i_c
    currents = np.vstack([i_b, i_c])
    order = _mode_order(t_vals, f, system.basis)
    diag["lambda"] = lam[order]
    return ModeSet(s=1.0 + 2.0 * t_vals[order], a=a[:, order], f=f[:, order],
                   k=k, basis=system.basis,
                   currents=currents[:, order], currents_c=i_c[:, order],
                   diagnostics=diag)
