"""Coupled-dipole volumetric MoM backend.

A scatterer is a cloud of point polarisable dipoles interacting through
the free-space dyadic Green function.  The diagonal of the impedance
matrix carries the exact radiative-reaction correction, so every
assembled scene is lossless by construction: ``Re Z = U1^T U1`` with a
real projection matrix U1 whose rows sample the regular spherical
waves at the dipole positions.  Consequently ``S = I + 2 T`` with
``T = -U1 Z^-1 U1^T`` is unitary to rounding.

Impedances are expressed in free-space-impedance units; port reference
impedances given in Ohm are divided by eta_0 on entry.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import swe
from .exceptions import DomainError, GeometryError, ShapeError, SolveError
from .network import CompositeBasis, OperatorMatrix
from .swe import WaveBasis

#: free-space wave impedance, Ohm
ETA0 = 376.730313668

#: vector mirror for the z = 0 plane
_MIRROR = np.diag([1.0, 1.0, -1.0])

#: moment map of image theory (tangential flipped, normal preserved)
IMAGE_FLIP = np.diag([-1.0, -1.0, 1.0])

CONTROLLABLE = "controllable"
BACKGROUND = "background"

_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


@dataclass(frozen=True)
class Port:
    """Power-wave port in series with one dipole axis."""

    element: int
    axis: int
    z0: float

    def __post_init__(self):
        object.__setattr__(self, "axis", _AXES[self.axis])
        if self.z0 <= 0 or not math.isfinite(self.z0):
            raise DomainError(f"port reference impedance must be positive, got {self.z0}")


@dataclass(frozen=True)
class DipoleScene:
    """Dipole cloud: positions (m), static polarisabilities (m^3), region labels.

    ``polarizability`` may be a scalar, per-dipole scalars, one 3x3
    tensor, or per-dipole 3x3 tensors; it is broadcast to (N, 3, 3)
    symmetric positive definite.  ``region`` defaults to all
    controllable.  With ``ground_plane`` set the plane z = 0 is a PEC
    mirror and all dipoles must sit strictly above it.
    """

    positions: np.ndarray
    polarizability: np.ndarray
    region: tuple[str, ...] = None
    ports: tuple[Port, ...] = ()
    ground_plane: bool = False

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        else:
            pos = np.atleast_2d(pos)
            if pos.ndim != 2 or pos.shape[1] != 3:
                raise ShapeError(f"positions must be (N, 3), got {pos.shape}")
        n = pos.shape[0]
        if n > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=-1) + np.eye(n)
            if np.min(dist) <= 0.0:
                raise GeometryError("dipole positions must be pairwise distinct")
        object.__setattr__(self, "positions", pos)

        alpha = np.asarray(self.polarizability, dtype=float)
        if alpha.ndim == 0:
            alpha = np.tile(alpha * np.eye(3), (n, 1, 1))
        elif alpha.shape == (n,):
            alpha = alpha[:, None, None] * np.eye(3)[None]
        elif alpha.shape == (3, 3):
            alpha = np.tile(alpha, (n, 1, 1))
        elif alpha.shape != (n, 3, 3):
            raise ShapeError(f"polarizability shape {alpha.shape} not broadcastable to ({n}, 3, 3)")
        if not np.allclose(alpha, np.swapaxes(alpha, 1, 2), rtol=1e-12, atol=0.0):
            raise DomainError("polarizability tensors must be symmetric")
        if np.any(np.linalg.eigvalsh(alpha) <= 0.0):
            raise DomainError("polarizability tensors must be positive definite")
        object.__setattr__(self, "polarizability", alpha)

        region = self.region
        if region is None:
            region = (CONTROLLABLE,) * n
        region = tuple(region)
        if len(region) != n or any(r not in (CONTROLLABLE, BACKGROUND) for r in region):
            raise DomainError("region labels must be 'controllable'/'background', one per dipole")
        object.__setattr__(self, "region", region)

        ports = tuple(self.ports)
        for p in ports:
            if not 0 <= p.element < n:
                raise DomainError(f"port references dipole {p.element} outside the scene")
            if region[p.element] != CONTROLLABLE:
                raise DomainError("port elements must belong to the controllable region")
        object.__setattr__(self, "ports", ports)

        if self.ground_plane:
            if np.any(pos[:, 2] <= 0.0):
                raise GeometryError("with a ground plane all dipoles must have z > 0")
            if ports:
                raise GeometryError("ports are not supported together with a ground plane")

    @property
    def n_dipoles(self) -> int:
        return self.positions.shape[0]

    @property
    def is_controllable(self) -> np.ndarray:
        return np.array([r == CONTROLLABLE for r in self.region], dtype=bool)

    @property
    def circumscribing_radius(self) -> float:
        if self.n_dipoles == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.positions, axis=1)))


def mirror_scene(scene: DipoleScene) -> DipoleScene:
    """Explicit free-space image scene for a ground-plane scene.

    Appends, for every dipole, its mirror image below z = 0 with the
    reflected polarisability tensor.  Used internally by the assembly and
    as the brute-force oracle for the parity-filter path.
    """
    if not scene.ground_plane:
        raise GeometryError("mirror_scene expects a scene with the ground_plane flag")
    if np.any(np.abs(scene.positions[:, 2]) < 1e-300):
        raise GeometryError("dipole on the mirror plane z = 0")
    pos_img = scene.positions @ _MIRROR
    alpha_img = np.einsum("ij,njk,kl->nil", _MIRROR, scene.polarizability, _MIRROR)
    return DipoleScene(
        positions=np.vstack([scene.positions, pos_img]),
        polarizability=np.concatenate([scene.polarizability, alpha_img]),
        region=scene.region + scene.region,
        ports=(),
        ground_plane=False,
    )


def _green_blocks(k: float, diff: np.ndarray) -> np.ndarray:
    """Dyadic Green blocks for an array of separation vectors (..., 3)."""
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d == 0.0):
        raise GeometryError("dyadic Green function evaluated at coincident points")
    u = diff / d[..., None]
    kr = k * d
    sc = np.exp(-1j * kr) / (4.0 * np.pi * d)
    t1 = 1.0 - 1j / kr - 1.0 / kr**2
    t2 = -1.0 + 3j / kr + 3.0 / kr**2
    uu = u[..., :, None] * u[..., None, :]
    return sc[..., None, None] * (t1[..., None, None] * np.eye(3) + t2[..., None, None] * uu)


def dyadic_green(k: float, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Free-space dyadic Green function blocks between two point sets.

    Returns (N1, N2, 3, 3) complex with exp(-jkR)/(4 pi R) radial
    dependence (time convention exp(+j w t)).  Coincident points are not
    allowed.
    """
    a = np.atleast_2d(np.asarray(r1, dtype=float))
    b = np.atleast_2d(np.asarray(r2, dtype=float))
    return _green_blocks(k, a[:, None, :] - b[None, :, :])


@dataclass
class BlockImpedance:
    """Impedance and projection blocks, background unknowns first.

    The full system matrix is complex symmetric with
    ``Re Z = U1^T U1`` to rounding (lossless construction).  ``perm``
    maps system rows to flat scene unknowns ``3 * dipole + axis`` of the
    assembled (possibly image-augmented) scene.
    """

    Z_bb: np.ndarray
    Z_bc: np.ndarray
    Z_cb: np.ndarray
    Z_cc: np.ndarray
    U1_b: np.ndarray
    U1_c: np.ndarray
    basis: WaveBasis
    k: float
    scene: DipoleScene
    perm: np.ndarray
    source_scene: DipoleScene | None = None

    @property
    def n_b(self) -> int:
        return self.Z_bb.shape[0]

    @property
    def n_c(self) -> int:
        return self.Z_cc.shape[0]

    @property
    def Z(self) -> np.ndarray:
        return np.block([[self.Z_bb, self.Z_bc], [self.Z_cb, self.Z_cc]])

    @property
    def U1(self) -> np.ndarray:
        return np.hstack([self.U1_b, self.U1_c])

    def factorization_residual(self) -> float:
        """Relative deviation of Re Z from U1^T U1 (basis-resolution gauge)."""
        z = self.Z
        u = self.U1
        return float(np.linalg.norm(z.real - u.T @ u) / np.linalg.norm(z.real))


def default_basis(scene: DipoleScene, k: float) -> WaveBasis:
    """Wave basis from the truncation rule at the scene's circumscribing radius."""
    scn = mirror_scene(scene) if scene.ground_plane else scene
    ka = k * scn.circumscribing_radius
    l_max = 1 if ka == 0.0 else swe.truncation_order(ka)
    return swe.basis(l_max)


def assemble_impedance(scene: DipoleScene, k: float,
                       wave_basis: WaveBasis | None = None) -> BlockImpedance:
    """Assemble the block impedance system and real wave projection.

    Off-diagonal 3x3 blocks are ``(j/k) G`` with the free-space dyadic
    Green function G; diagonal blocks carry the inverse static
    polarisability with the exact radiative correction ``I/(6 pi)`` that
    makes each dipole, and hence the scene, lossless.  With the
    ground-plane flag set, image dipoles are appended internally.
    """
    if k <= 0 or not math.isfinite(k):
        raise DomainError(f"wavenumber must be positive and finite, got {k!r}")
    source_scene = None
    if scene.ground_plane:
        source_scene = scene
        scene = mirror_scene(scene)
    if wave_basis is None:
        wave_basis = default_basis(scene, k)

    pos = scene.positions
    n = scene.n_dipoles
    z = np.zeros((3 * n, 3 * n), dtype=complex)
    if n > 1:
        gi, gj = np.nonzero(~np.eye(n, dtype=bool))
        g = _green_blocks(k, pos[gi] - pos[gj])
        zv = z.reshape(n, 3, n, 3).transpose(0, 2, 1, 3)
        zv[gi, gj] = (1j / k) * g
    inv_alpha = np.linalg.inv(scene.polarizability)
    for p in range(n):
        z[3 * p:3 * p + 3, 3 * p:3 * p + 3] = \
            np.eye(3) / (6.0 * np.pi) - 1j * inv_alpha[p] / k**3

    tab = swe.regular_wave_table(wave_basis, k, pos)  # (n_waves, N, 3)
    u1 = tab.reshape(wave_basis.size, 3 * n)

    mask_c = np.repeat(scene.is_controllable, 3)
    perm = np.concatenate([np.flatnonzero(~mask_c), np.flatnonzero(mask_c)])
    z_sys = z[np.ix_(perm, perm)]
    u_sys = u1[:, perm]
    nb = int(np.count_nonzero(~mask_c))
    blocks = BlockImpedance(
        Z_bb=z_sys[:nb, :nb], Z_bc=z_sys[:nb, nb:],
        Z_cb=z_sys[nb:, :nb], Z_cc=z_sys[nb:, nb:],
        U1_b=u_sys[:, :nb], U1_c=u_sys[:, nb:],
        basis=wave_basis, k=k, scene=scene, perm=perm,
        source_scene=source_scene,
    )
    if n > 0:
        residual = blocks.factorization_residual()
        if residual > 1e-6:
            warnings.warn(
                f"wave basis l_max={wave_basis.l_max} under-resolves the scene: "
                f"radiation factorization residual {residual:.2e}",
                stacklevel=2,
            )
    return blocks


def assemble_projection(scene: DipoleScene, k: float,
                        wave_basis: WaveBasis | None = None) -> np.ndarray:
    """Real projection U1 (n_waves x 3N) alone, in scene (unpermuted) order."""
    if scene.ground_plane:
        scene = mirror_scene(scene)
    if wave_basis is None:
        wave_basis = default_basis(scene, k)
    tab = swe.regular_wave_table(wave_basis, k, scene.positions)
    return tab.reshape(wave_basis.size, 3 * scene.n_dipoles)


def _solve(z: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if z.shape[0] == 0:
        return np.zeros((0, rhs.shape[1]) if rhs.ndim == 2 else 0, dtype=complex)
    try:
        lu, piv = la.lu_factor(z)
    except la.LinAlgError as err:  # pragma: no cover
        raise SolveError(f"{what}: factorisation failed: {err}")
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * diag.max():
        cond = np.linalg.cond(z)
        raise SolveError(f"{what}: matrix numerically singular (cond ~ {cond:.3e})")
    return la.lu_solve((lu, piv), rhs)


@dataclass
class TransitionSet:
    """Transition/scattering operators of a scene and of its background."""

    T: OperatorMatrix
    T_b: OperatorMatrix
    S: OperatorMatrix
    S_b: OperatorMatrix
    blocks: BlockImpedance


def transition(scene: DipoleScene, k: float,
               wave_basis: WaveBasis | None = None,
               blocks: BlockImpedance | None = None) -> TransitionSet:
    """T and S for the full scene, plus the background-only T_b and S_b.

    The background operators use only the background block of the
    impedance system (bordered / zero-padded in the full unknown set).
    An empty background yields T_b = 0, S_b = I.
    """
    if blocks is None:
        blocks = assemble_impedance(scene, k, wave_basis)
    b = blocks.basis
    dim = b.size
    eye = np.eye(dim)
    t_full = -blocks.U1 @ _solve(blocks.Z, blocks.U1.T.astype(complex), "transition")
    if blocks.n_b > 0:
        t_bg = -blocks.U1_b @ _solve(blocks.Z_bb, blocks.U1_b.T.astype(complex),
                                     "background transition")
    else:
        t_bg = np.zeros((dim, dim), dtype=complex)
    return TransitionSet(
        T=OperatorMatrix("T", t_full, b),
        T_b=OperatorMatrix("T", t_bg, b),
        S=OperatorMatrix("S", 2.0 * t_full + eye, b),
        S_b=OperatorMatrix("S", 2.0 * t_bg + eye, b),
        blocks=blocks,
    )


@dataclass
class GeneralizedScattering:
    """Port-augmented scattering matrix over (spherical waves + port power waves)."""

    S: OperatorMatrix
    T: OperatorMatrix
    basis: CompositeBasis
    blocks: BlockImpedance
    port_rows: np.ndarray

    @property
    def n_ports(self) -> int:
        return len(self.basis.extra_labels)


def generalized_scattering(scene: DipoleScene, k: float,
                           wave_basis: WaveBasis | None = None) -> GeneralizedScattering:
    """Scattering matrix with lumped power-wave ports appended.

    Each port adds its reference impedance in series on the port
    element's diagonal and one power-wave channel.  The augmented
    projection stacks sqrt(z0) port rows under U1, which keeps
    ``Re Z' = U^T U`` exact and hence the full matrix unitary for these
    lossless scenes.  With no ports this reduces to ``transition``'s S.
    """
    blocks = assemble_impedance(scene, k, wave_basis)
    scn = blocks.scene
    dim = blocks.basis.size
    n_unknown = 3 * scn.n_dipoles

    z = blocks.Z.copy()
    u_rows = [blocks.U1]
    labels = []
    port_rows = []
    inv_perm = np.empty(n_unknown, dtype=int)
    inv_perm[blocks.perm] = np.arange(n_unknown)
    for i, port in enumerate(scn.ports):
        row = inv_perm[3 * port.element + port.axis]
        z0 = port.z0 / ETA0
        z[row, row] += z0
        e = np.zeros((1, n_unknown))
        e[0, row] = math.sqrt(z0)
        u_rows.append(e)
        labels.append(f"port{i}")
        port_rows.append(row)
    u_hat = np.vstack(u_rows)

    t_hat = -u_hat @ _solve(z, u_hat.T.astype(complex), "generalized scattering")
    basis = CompositeBasis(wave=blocks.basis, extra_labels=tuple(labels))
    s_hat = 2.0 * t_hat + np.eye(dim + len(labels))
    return GeneralizedScattering(
        S=OperatorMatrix("S", s_hat, basis),
        T=OperatorMatrix("T", t_hat, basis),
        basis=basis,
        blocks=blocks,
        port_rows=np.array(port_rows, dtype=int),
    )
