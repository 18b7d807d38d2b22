"""Linear plane-stress finite elements with zero-thickness interfaces.

Two solution routes are provided:

* :func:`assemble_and_solve` assembles the full sparse system and solves it
  directly.  It is the reference route used for verification.
* :class:`InterfaceSystem` statically condenses the (unchanging) bulk onto
  the interface, monitor and load degrees of freedom once, and then
  re-factorizes only the small dense condensed matrix for every new set of
  interface stiffnesses.  This is what the event-by-event solvers use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from sla_inverse.mesh import Mesh

_G = 1.0 / math.sqrt(3.0)
GAUSS_POINTS = np.array([(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)])

#: default ratio between shear and normal interface penalty stiffness
SHEAR_PENALTY_RATIO = 1.0e4


class SingularSystemError(RuntimeError):
    """The stiffness matrix is not positive definite (e.g. missing supports)."""


@dataclass(frozen=True)
class Material:
    """Linear elastic plane-stress material (moduli in MPa).

    Orthotropic axes coincide with the global x/y axes.
    """

    kind: str = "isotropic"
    E: float = 30000.0
    nu: float = 0.2
    E_xx: float = float("nan")
    E_yy: float = float("nan")
    G_xy: float = float("nan")
    nu_xy: float = float("nan")

    @classmethod
    def isotropic(cls, E: float, nu: float) -> "Material":
        return cls("isotropic", E=E, nu=nu)

    @classmethod
    def orthotropic(cls, E_xx: float, E_yy: float, G_xy: float, nu_xy: float) -> "Material":
        return cls("orthotropic", E=E_xx, nu=nu_xy, E_xx=E_xx, E_yy=E_yy, G_xy=G_xy, nu_xy=nu_xy)

    @property
    def reference_modulus(self) -> float:
        """Modulus used for the default interface penalty (``E`` or ``E_xx``)."""
        return self.E_xx if self.kind == "orthotropic" else self.E

    def scaled(self, factor: float) -> "Material":
        """Same material with every modulus multiplied by ``factor``."""
        if self.kind == "orthotropic":
            return Material.orthotropic(self.E_xx * factor, self.E_yy * factor, self.G_xy * factor, self.nu_xy)
        return Material.isotropic(self.E * factor, self.nu)


def elastic_matrix(material: Material) -> np.ndarray:
    """3x3 plane-stress constitutive matrix in Voigt order (xx, yy, xy)."""
    if material.kind == "isotropic":
        E, nu = material.E, material.nu
        if not E > 0.0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= nu < 0.5:
            raise ValueError("Poisson's ratio must lie in [0, 0.5)")
        c = E / (1.0 - nu * nu)
        return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    if material.kind == "orthotropic":
        exx, eyy, gxy, nxy = material.E_xx, material.E_yy, material.G_xy, material.nu_xy
        if not (exx > 0.0 and eyy > 0.0 and gxy > 0.0):
            raise ValueError("orthotropic moduli must be positive")
        nyx = nxy * eyy / exx
        den = 1.0 - nxy * nyx
        if den <= 0.0:
            raise ValueError("orthotropic plane-stress matrix is not positive definite")
        D = np.array(
            [[exx / den, nxy * eyy / den, 0.0], [nxy * eyy / den, eyy / den, 0.0], [0.0, 0.0, gxy]]
        )
        if np.linalg.eigvalsh(D).min() <= 0.0:
            raise ValueError("orthotropic plane-stress matrix is not positive definite")
        return D
    raise ValueError(f"unknown material kind {material.kind!r}")


def _shape_derivatives(xi: float, eta: float) -> np.ndarray:
    """dN/d(xi, eta), shape (2, 4)."""
    return 0.25 * np.array(
        [[-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
         [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]]
    )


def q4_strain_matrix(xy: np.ndarray, xi: float, eta: float) -> tuple[np.ndarray, float]:
    """Strain-displacement matrix B (3x8) and Jacobian determinant."""
    dn = _shape_derivatives(xi, eta)
    J = dn @ xy
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if det <= 0.0:
        raise ValueError("degenerate or clockwise quadrilateral (non-positive Jacobian)")
    dxy = np.linalg.solve(J, dn)
    B = np.zeros((3, 8))
    B[0, 0::2] = dxy[0]
    B[1, 1::2] = dxy[1]
    B[2, 0::2] = dxy[1]
    B[2, 1::2] = dxy[0]
    return B, det


def q4_stiffness(xy, D: np.ndarray, thickness: float) -> np.ndarray:
    """8x8 stiffness of a bilinear quad, 2x2 Gauss quadrature."""
    xy = np.asarray(xy, dtype=float).reshape(4, 2)
    K = np.zeros((8, 8))
    for xi, eta in GAUSS_POINTS:
        B, det = q4_strain_matrix(xy, xi, eta)
        K += B.T @ D @ B * det
    return thickness * K


def _q4_stiffness_batch(xy: np.ndarray, D: np.ndarray, thickness: float) -> np.ndarray:
    """Vectorised :func:`q4_stiffness` for ``xy`` of shape (m, 4, 2)."""
    m = xy.shape[0]
    K = np.zeros((m, 8, 8))
    for xi, eta in GAUSS_POINTS:
        dn = _shape_derivatives(xi, eta)
        J = np.einsum("ij,mjk->mik", dn, xy)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(det <= 0.0):
            raise ValueError("degenerate or clockwise quadrilateral (non-positive Jacobian)")
        inv = np.empty_like(J)
        inv[:, 0, 0], inv[:, 1, 1] = J[:, 1, 1] / det, J[:, 0, 0] / det
        inv[:, 0, 1], inv[:, 1, 0] = -J[:, 0, 1] / det, -J[:, 1, 0] / det
        dxy = np.einsum("mij,jk->mik", inv, dn)
        B = np.zeros((m, 3, 8))
        B[:, 0, 0::2] = dxy[:, 0]
        B[:, 1, 1::2] = dxy[:, 1]
        B[:, 2, 0::2] = dxy[:, 1]
        B[:, 2, 1::2] = dxy[:, 0]
        K += np.einsum("mki,kl,mlj->mij", B, D, B) * det[:, None, None]
    return thickness * K


def interface_stiffness(xy, k_n, g_t, thickness: float) -> np.ndarray:
    """8x8 stiffness of a zero-thickness interface element.

    ``xy`` are the coordinates of ``(n1, n2, n3, n4)``; ``k_n`` and ``g_t`` are
    scalars or per-ip pairs (ip 0 at ``n1/n4``, ip 1 at ``n2/n3``).  Nodal
    (Newton-Cotes) integration: each ip carries half the element length.
    """
    xy = np.asarray(xy, dtype=float).reshape(4, 2)
    k_n = np.broadcast_to(np.asarray(k_n, dtype=float), (2,))
    g_t = np.broadcast_to(np.asarray(g_t, dtype=float), (2,))
    if np.any(k_n <= 0.0) or np.any(g_t <= 0.0):
        raise ValueError("interface stiffnesses must be positive")
    d = xy[1] - xy[0]
    length = float(np.hypot(*d))
    t = d / length
    n = np.array([-t[1], t[0]])
    K = np.zeros((8, 8))
    weight = 0.5 * length * thickness
    for ip, (minus, plus) in enumerate(((0, 3), (1, 2))):
        Dl = k_n[ip] * np.outer(n, n) + g_t[ip] * np.outer(t, t)
        for a, sa in ((minus, -1.0), (plus, 1.0)):
            for b, sb in ((minus, -1.0), (plus, 1.0)):
                K[2 * a : 2 * a + 2, 2 * b : 2 * b + 2] += sa * sb * weight * Dl
    return K


def _materials_for(mesh: Mesh, materials) -> dict[int, Material]:
    if isinstance(materials, Material):
        return {int(m): materials for m in np.unique(mesh.quad_material)} or {0: materials}
    mats = dict(materials)
    missing = set(np.unique(mesh.quad_material).tolist()) - set(mats)
    if missing:
        raise ValueError(f"no material given for ids {sorted(missing)}")
    return mats


def assemble_bulk(mesh: Mesh, materials: Material | Mapping[int, Material]) -> sp.csr_matrix:
    """Global bulk stiffness (all dofs, no supports), sparse symmetric."""
    mats = _materials_for(mesh, materials)
    ndof = mesh.n_dofs
    rows, cols, vals = [], [], []
    for mid, mat in mats.items():
        sel = np.nonzero(mesh.quad_material == mid)[0]
        if sel.size == 0:
            continue
        conn = mesh.quads[sel]
        Ke = _q4_stiffness_batch(mesh.nodes[conn], elastic_matrix(mat), mesh.thickness)
        dofs = np.empty((sel.size, 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * conn
        dofs[:, 1::2] = 2 * conn + 1
        rows.append(np.repeat(dofs, 8, axis=1).ravel())
        cols.append(np.tile(dofs, (1, 8)).ravel())
        vals.append(Ke.ravel())
    if not rows:
        return sp.csr_matrix((ndof, ndof))
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof)
    ).tocsr()
    return K


def load_vector(mesh: Mesh) -> np.ndarray:
    F = np.zeros(mesh.n_dofs)
    for node, d, v in mesh.loads:
        F[2 * node + d] += v
    return F


def fixed_dofs(mesh: Mesh) -> np.ndarray:
    return np.unique(np.array([2 * n + d for n, d in mesh.supports], dtype=np.int64))


def default_penalties(material: Material) -> tuple[float, float]:
    """``k0`` numerically equal to the modulus [MPa/mm]; ``g0 = 1e4 k0``."""
    k0 = float(material.reference_modulus)
    return k0, SHEAR_PENALTY_RATIO * k0


class _IpGeometry(NamedTuple):
    minus: np.ndarray  # (n_ips,) node ids
    plus: np.ndarray
    normal: np.ndarray  # (n_ips, 2)
    tangent: np.ndarray
    area: np.ndarray  # (n_ips,) tributary area [mm^2]


def ip_geometry(mesh: Mesh) -> _IpGeometry:
    length, t, n = mesh.interface_geometry() if len(mesh.interfaces) else (
        np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)))
    ipn = mesh.ip_nodes()
    rep = lambda a: np.repeat(a, 2, axis=0)  # noqa: E731
    return _IpGeometry(ipn[:, 0], ipn[:, 1], rep(n), rep(t), rep(0.5 * length * mesh.thickness))


def assemble_interfaces(mesh: Mesh, k_n, g_t) -> sp.csr_matrix:
    """Global interface stiffness for per-ip normal/shear stiffnesses."""
    geo = ip_geometry(mesh)
    nip = len(geo.area)
    k_n = np.broadcast_to(np.asarray(k_n, dtype=float), (nip,))
    g_t = np.broadcast_to(np.asarray(g_t, dtype=float), (nip,))
    if np.any(k_n <= 0.0) or np.any(g_t <= 0.0):
        raise ValueError("interface stiffnesses must be positive")
    rows, cols, vals = [], [], []
    for ip in range(nip):
        n, t = geo.normal[ip], geo.tangent[ip]
        Dl = geo.area[ip] * (k_n[ip] * np.outer(n, n) + g_t[ip] * np.outer(t, t))
        dofs = [2 * geo.minus[ip], 2 * geo.minus[ip] + 1, 2 * geo.plus[ip], 2 * geo.plus[ip] + 1]
        Ke = np.block([[Dl, -Dl], [-Dl, Dl]])
        for a in range(4):
            for b in range(4):
                rows.append(dofs[a])
                cols.append(dofs[b])
                vals.append(Ke[a, b])
    ndof = mesh.n_dofs
    return sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()


def _residual(K: sp.csr_matrix, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``f - K u`` accumulated in extended precision."""
    prod = K.data.astype(np.longdouble) * u.astype(np.longdouble)[K.indices]
    rows = np.zeros(K.shape[0], dtype=np.longdouble)
    nz = np.diff(K.indptr) > 0
    rows[nz] = np.add.reduceat(prod, K.indptr[:-1][nz])
    return f.astype(np.longdouble) - rows


def relative_residual(K, u: np.ndarray, f: np.ndarray) -> float:
    """``||f - K u|| / ||f||`` with the residual in extended precision."""
    r = _residual(sp.csr_matrix(K), np.asarray(u, dtype=float), np.asarray(f, dtype=float))
    return float(np.sqrt(np.sum(r * r)) / np.linalg.norm(f))


class Solution(NamedTuple):
    u: np.ndarray
    reactions: np.ndarray
    control: float
    response: float


def evaluate_monitor(mesh: Mesh, monitor, u: np.ndarray, forces: np.ndarray) -> float:
    source = u if monitor.kind == "disp" else forces
    return float(monitor.coefficients() @ source[monitor.dofs()])


def assemble_and_solve(
    mesh: Mesh,
    materials: Material | Mapping[int, Material],
    k_n,
    g_t,
    scale: float = 1.0,
) -> Solution:
    """Direct sparse solve of ``K u = scale * F`` with supports eliminated.

    Returns the full displacement vector, the support reactions (zero away
    from supports) and both monitor values.
    """
    K = assemble_bulk(mesh, materials)
    if mesh.n_ips:
        K = K + assemble_interfaces(mesh, k_n, g_t)
    F = scale * load_vector(mesh)
    fixed = fixed_dofs(mesh)
    free = np.setdiff1d(np.arange(mesh.n_dofs), fixed)
    u = np.zeros(mesh.n_dofs)
    Kff = K[free][:, free].tocsc()
    if np.any(F[free]):
        try:
            lu = spla.splu(Kff)
        except RuntimeError as exc:
            raise SingularSystemError(f"stiffness matrix is singular: {exc}") from exc
        f = F[free]
        uf = lu.solve(f)
        if not np.all(np.isfinite(uf)):
            raise SingularSystemError("stiffness matrix is singular")
        # penalty stiffnesses make the system ill-conditioned; refine with an
        # extended-precision residual (mixed-precision iterative refinement)
        norm_f = np.linalg.norm(f)
        Kff = Kff.tocsr()
        for _ in range(5):
            r = _residual(Kff, uf, f)
            res = float(np.sqrt(np.sum(r * r))) / norm_f
            if res <= 1e-12:
                break
            uf = uf + lu.solve(r.astype(float))
        if res > 1e-10:
            raise SingularSystemError(f"solve residual {res:.3e} exceeds 1e-10")
        u[free] = uf
    reactions = K @ u - F
    reactions[free] = 0.0
    control = evaluate_monitor(mesh, mesh.control, u, F)
    response = evaluate_monitor(mesh, mesh.response, u, F)
    return Solution(u, reactions, control, response)


class InterfaceState(NamedTuple):
    w: np.ndarray  # normal opening [mm]
    slip: np.ndarray  # tangential jump [mm]
    sigma: np.ndarray  # normal traction [MPa]
    tau: np.ndarray  # shear traction [MPa]


def extract_interface_state(mesh: Mesh, u: np.ndarray, k_n, g_t) -> InterfaceState:
    """Jumps and tractions at every interface ip from a full displacement vector."""
    geo = ip_geometry(mesh)
    u2 = np.asarray(u).reshape(-1, 2)
    jump = u2[geo.plus] - u2[geo.minus]
    w = np.einsum("ij,ij->i", jump, geo.normal)
    slip = np.einsum("ij,ij->i", jump, geo.tangent)
    return InterfaceState(w, slip, np.asarray(k_n) * w, np.asarray(g_t) * slip)


def bulk_state(mesh: Mesh, materials, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Strains and stresses at the 2x2 Gauss points, each of shape (n_quads, 4, 3)."""
    mats = _materials_for(mesh, materials)
    nq = len(mesh.quads)
    eps = np.zeros((nq, 4, 3))
    sig = np.zeros((nq, 4, 3))
    for e, conn in enumerate(mesh.quads):
        xy = mesh.nodes[conn]
        ue = np.asarray(u).reshape(-1, 2)[conn].ravel()
        D = elastic_matrix(mats[int(mesh.quad_material[e])])
        for g, (xi, eta) in enumerate(GAUSS_POINTS):
            B, _ = q4_strain_matrix(xy, xi, eta)
            eps[e, g] = B @ ue
            sig[e, g] = D @ eps[e, g]
    return eps, sig


class IpResponse(NamedTuple):
    """Interface response under the reference load for one stiffness state."""

    w: np.ndarray
    sigma: np.ndarray
    control: float
    response: float
    closed: np.ndarray  # ips held at the penalty stiffness because they are in contact


class InterfaceSystem:
    """Bulk statically condensed onto interface, monitor and load dofs.

    Parameters
    ----------
    mesh, materials
        Model definition; the bulk is linear elastic.
    k0, g0 : float, optional
        Normal and shear penalty stiffness [MPa/mm]; defaults from
        :func:`default_penalties`.
    load_scale : float
        Multiplier applied to the mesh reference load.
    """

    def __init__(self, mesh: Mesh, materials, k0=None, g0=None, load_scale: float = 1.0):
        mesh.validate()
        if isinstance(materials, Material):
            ref = materials
        else:
            ref = next(iter(dict(materials).values()))
        dk0, dg0 = default_penalties(ref)
        self.mesh = mesh
        self.materials = materials
        self.k0 = float(k0) if k0 is not None else dk0
        self.g0 = float(g0) if g0 is not None else dg0
        if self.k0 <= 0.0 or self.g0 <= 0.0:
            raise ValueError("penalty stiffnesses must be positive")
        self.n_ips = mesh.n_ips
        self.factorizations = 0

        F = load_scale * load_vector(mesh)
        self.F = F
        fixed = fixed_dofs(mesh)
        is_fixed = np.zeros(mesh.n_dofs, dtype=bool)
        is_fixed[fixed] = True
        geo = ip_geometry(mesh)
        self.geo = geo

        keep = set()
        for nodes in (geo.minus, geo.plus):
            keep.update((2 * nodes).tolist())
            keep.update((2 * nodes + 1).tolist())
        for mon in mesh.monitors:
            if mon.kind == "disp":
                keep.update(mon.dofs().tolist())
        keep.update(np.nonzero(F)[0].tolist())
        R = np.array(sorted(d for d in keep if not is_fixed[d]), dtype=np.int64)
        free = np.nonzero(~is_fixed)[0]
        I = np.setdiff1d(free, R)
        self.R, self.I = R, I

        K = assemble_bulk(mesh, materials).tocsr()
        Krr = K[R][:, R].toarray()
        if I.size:
            Kii = K[I][:, I].tocsc()
            Kir = K[I][:, R].toarray()
            try:
                self._lu = spla.splu(Kii)
            except RuntimeError as exc:
                raise SingularSystemError(f"bulk stiffness is singular: {exc}") from exc
            X = self._lu.solve(Kir)
            self._yI = self._lu.solve(F[I])
            if not (np.all(np.isfinite(X)) and np.all(np.isfinite(self._yI))):
                raise SingularSystemError("bulk stiffness is singular")
            self._X = X
            S = Krr - Kir.T @ X
            fR = F[R] - X.T @ F[I]
        else:
            self._lu = None
            self._X = np.zeros((0, R.size))
            self._yI = np.zeros(0)
            S = Krr
            fR = F[R].copy()
        self.S = 0.5 * (S + S.T)
        self.fR = fR

        # local index of every dof in R, fixed/condensed-out dofs map to slot m (dropped)
        m = R.size
        self._m = m
        loc = np.full(mesh.n_dofs, m, dtype=np.int64)
        loc[R] = np.arange(m)
        self._loc = loc
        ldofs = np.column_stack(
            [loc[2 * geo.minus], loc[2 * geo.minus + 1], loc[2 * geo.plus], loc[2 * geo.plus + 1]]
        )
        self._ip_ldofs = ldofs
        sign = np.array([-1.0, -1.0, 1.0, 1.0])
        # per-ip 4x4 patterns for unit normal and unit shear stiffness
        vn = np.concatenate([geo.normal, geo.normal], axis=1) * sign
        vt = np.concatenate([geo.tangent, geo.tangent], axis=1) * sign
        self._Pn = (geo.area[:, None, None] * vn[:, :, None] * vn[:, None, :]).reshape(-1, 16)
        self._Pt = (geo.area[:, None, None] * vt[:, :, None] * vt[:, None, :]).reshape(-1, 16)
        self._flat = (ldofs[:, :, None] * (m + 1) + ldofs[:, None, :]).reshape(-1, 16)
        self._vn = vn
        self._mon = []
        for mon in mesh.monitors:
            if mon.kind == "disp":
                self._mon.append(("disp", loc[mon.dofs()], mon.coefficients()))
            else:
                self._mon.append(("force", None, float(mon.coefficients() @ F[mon.dofs()])))

    def stiffness(self, k_n) -> np.ndarray:
        """Condensed stiffness for per-ip normal stiffnesses (shear at ``g0``)."""
        m = self._m
        vals = np.asarray(k_n, dtype=float)[:, None] * self._Pn + self.g0 * self._Pt
        Kc = np.bincount(self._flat.ravel(), weights=vals.ravel(), minlength=(m + 1) ** 2)
        return self.S + Kc.reshape(m + 1, m + 1)[:m, :m]

    def solve(self, k_n) -> np.ndarray:
        """Condensed displacements (with a trailing zero for fixed dofs)."""
        K = self.stiffness(k_n)
        try:
            c = sla.cho_factor(K, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("condensed stiffness is not positive definite") from exc
        self.factorizations += 1
        uR = sla.cho_solve(c, self.fR, check_finite=False)
        return np.append(uR, 0.0)

    def openings(self, uR: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", uR[self._ip_ldofs], self._vn)

    def monitors(self, uR: np.ndarray) -> tuple[float, float]:
        out = []
        for kind, idx, coef in self._mon:
            out.append(float(coef @ uR[idx]) if kind == "disp" else coef)
        return out[0], out[1]

    def response(self, k_secant, closed=None, max_iter: int = 50) -> IpResponse:
        """Solve under the reference load.

        Cracked ips (secant below ``k0``) that would overlap are switched to
        the penalty stiffness ``k0`` (no softening in compression); the
        contact set is iterated to a fixed point.
        """
        k_secant = np.asarray(k_secant, dtype=float)
        cracked = k_secant < self.k0
        closed = np.zeros(self.n_ips, dtype=bool) if closed is None else (np.asarray(closed) & cracked)
        for _ in range(max_iter):
            k_eff = np.where(closed, self.k0, k_secant)
            uR = self.solve(k_eff)
            w = self.openings(uR)
            new_closed = cracked & ((w < 0.0) | (closed & (w <= 0.0)))
            if np.array_equal(new_closed, closed):
                break
            closed = new_closed
        else:
            raise RuntimeError("contact iteration did not converge")
        c, r = self.monitors(uR)
        return IpResponse(w, k_eff * w, c, r, closed)

    def full_displacement(self, uR: np.ndarray) -> np.ndarray:
        """Recover all nodal displacements from a condensed solution."""
        u = np.zeros(self.mesh.n_dofs)
        u[self.R] = uR[: self._m]
        if self.I.size:
            u[self.I] = self._yI - self._X @ uR[: self._m]
        return u
