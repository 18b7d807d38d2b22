"""Structured 2D meshes with an embedded cohesive crack path.

Node ``i`` has degrees of freedom ``2*i`` (x) and ``2*i + 1`` (y).  An
interface element stores four nodes ``(n1, n2, n3, n4)``: ``n1 -> n2`` is the
"minus" face running along the element tangent, ``n4`` and ``n3`` are the
coincident "plus" face nodes.  The unit normal is the tangent rotated by +90
degrees and points from the minus face to the plus face, so a positive normal
jump ``n . (u_plus - u_minus)`` is an opening.

Integration points of interface elements sit at the node pairs (2-point
Newton-Cotes rule): ip ``2*e`` at ``(n1, n4)`` and ip ``2*e + 1`` at
``(n2, n3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DIRS = {"x": 0, "y": 1}
DIR_NAMES = ("x", "y")

_GAUSS = 1.0 / math.sqrt(3.0)
_GP = ((-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS))


class MeshError(ValueError):
    """Inconsistent geometry, connectivity or mesh file."""


@dataclass(frozen=True)
class Monitor:
    """Scalar probe ``sum(coeff * value[node, dir])``.

    ``kind`` is ``"disp"`` (nodal displacements) or ``"force"`` (applied
    reference forces, scaled with the load multiplier).
    """

    name: str
    kind: str
    terms: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.kind not in ("disp", "force"):
            raise MeshError(f"monitor {self.name!r}: unknown kind {self.kind!r}")
        if not self.terms:
            raise MeshError(f"monitor {self.name!r} has no terms")
        terms = tuple((int(n), int(d), float(c)) for n, d, c in self.terms)
        object.__setattr__(self, "terms", terms)

    def dofs(self) -> np.ndarray:
        return np.array([2 * n + d for n, d, _ in self.terms], dtype=int)

    def coefficients(self) -> np.ndarray:
        return np.array([c for _, _, c in self.terms], dtype=float)


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable 2D mesh with bulk quads, interface elements and boundary data."""

    nodes: np.ndarray
    quads: np.ndarray
    quad_material: np.ndarray
    interfaces: np.ndarray
    supports: tuple[tuple[int, int], ...] = ()
    loads: tuple[tuple[int, int, float], ...] = ()
    monitors: tuple[Monitor, ...] = ()
    thickness: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(np.reshape(self.nodes, (-1, 2)), float))
        object.__setattr__(self, "quads", _frozen(np.reshape(self.quads, (-1, 4)), np.int64))
        qm = self.quad_material
        if qm is None or np.size(qm) == 0:
            qm = np.zeros(len(self.quads), dtype=np.int64)
        object.__setattr__(self, "quad_material", _frozen(qm, np.int64))
        object.__setattr__(self, "interfaces", _frozen(np.reshape(self.interfaces, (-1, 4)), np.int64))
        object.__setattr__(self, "supports", tuple((int(n), int(d)) for n, d in self.supports))
        object.__setattr__(self, "loads", tuple((int(n), int(d), float(v)) for n, d, v in self.loads))
        object.__setattr__(self, "monitors", tuple(self.monitors))
        object.__setattr__(self, "thickness", float(self.thickness))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.quads, other.quads)
            and np.array_equal(self.quad_material, other.quad_material)
            and np.array_equal(self.interfaces, other.interfaces)
            and self.supports == other.supports
            and self.loads == other.loads
            and self.monitors == other.monitors
            and self.thickness == other.thickness
        )

    __hash__ = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def n_ips(self) -> int:
        return 2 * len(self.interfaces)

    @property
    def control(self) -> Monitor:
        return self.monitors[0]

    @property
    def response(self) -> Monitor:
        return self.monitors[1]

    def replace(self, **changes) -> "Mesh":
        data = {
            "nodes": self.nodes,
            "quads": self.quads,
            "quad_material": self.quad_material,
            "interfaces": self.interfaces,
            "supports": self.supports,
            "loads": self.loads,
            "monitors": self.monitors,
            "thickness": self.thickness,
        }
        data.update(changes)
        return Mesh(**data)

    # -- interface geometry -------------------------------------------------

    def interface_geometry(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-element length, unit tangent and unit normal."""
        if "igeom" not in self._cache:
            ie = self.interfaces
            d = self.nodes[ie[:, 1]] - self.nodes[ie[:, 0]]
            length = np.hypot(d[:, 0], d[:, 1])
            if np.any(length <= 0.0):
                raise MeshError("interface element with zero length")
            t = d / length[:, None]
            n = np.column_stack([-t[:, 1], t[:, 0]])
            self._cache["igeom"] = (length, t, n)
        return self._cache["igeom"]

    def ip_nodes(self) -> np.ndarray:
        """``(n_ips, 2)`` array of (minus node, plus node) for every ip."""
        ie = self.interfaces
        out = np.empty((self.n_ips, 2), dtype=np.int64)
        out[0::2, 0], out[0::2, 1] = ie[:, 0], ie[:, 3]
        out[1::2, 0], out[1::2, 1] = ie[:, 1], ie[:, 2]
        return out

    def ip_coordinates(self) -> np.ndarray:
        return self.nodes[self.ip_nodes()[:, 0]]

    def ip_colocated_groups(self) -> list[list[int]]:
        """Groups of ips that sit on the same node pair (identical jumps)."""
        groups: dict[tuple[int, int], list[int]] = {}
        for ip, (a, b) in enumerate(self.ip_nodes()):
            groups.setdefault((int(a), int(b)), []).append(ip)
        return list(groups.values())

    # -- checks ----------------------------------------------------------------

    def quad_jacobians(self) -> np.ndarray:
        """Jacobian determinants at the 2x2 Gauss points, shape ``(n_quads, 4)``."""
        xy = self.nodes[self.quads]
        dets = np.empty((len(self.quads), 4))
        for g, (xi, eta) in enumerate(_GP):
            dn_dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
            dn_deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
            j11 = xy[:, :, 0] @ dn_dxi
            j12 = xy[:, :, 1] @ dn_dxi
            j21 = xy[:, :, 0] @ dn_deta
            j22 = xy[:, :, 1] @ dn_deta
            dets[:, g] = j11 * j22 - j12 * j21
        return dets

    def validate(self) -> "Mesh":
        n = self.n_nodes
        if not np.all(np.isfinite(self.nodes)):
            raise MeshError("node coordinates must be finite")
        for name, arr in (("quad", self.quads), ("interface", self.interfaces)):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise MeshError(f"{name} element references a missing node")
        if len(self.quads) and np.any(self.quad_jacobians() <= 0.0):
            bad = int(np.nonzero(np.any(self.quad_jacobians() <= 0.0, axis=1))[0][0])
            raise MeshError(f"quad {bad} is degenerate or not counter-clockwise")
        if len(self.interfaces):
            ipn = self.ip_nodes()
            gap = np.hypot(*(self.nodes[ipn[:, 1]] - self.nodes[ipn[:, 0]]).T)
            if np.any(gap > 1e-12):
                raise MeshError("interface node pairs must coincide (zero thickness)")
            self.interface_geometry()
            _check_simple_path(self.interfaces)
        for node, d in self.supports:
            if not (0 <= node < n and d in (0, 1)):
                raise MeshError(f"support on missing dof ({node}, {d})")
        for node, d, _ in self.loads:
            if not (0 <= node < n and d in (0, 1)):
                raise MeshError(f"load on missing dof ({node}, {d})")
        if len(self.monitors) != 2:
            raise MeshError("a mesh needs exactly two monitors (control, response)")
        for mon in self.monitors:
            for node, d, _ in mon.terms:
                if not (0 <= node < n and d in (0, 1)):
                    raise MeshError(f"monitor {mon.name!r} references missing dof ({node}, {d})")
        if self.thickness <= 0.0:
            raise MeshError("thickness must be positive")
        return self


def _check_simple_path(interfaces: np.ndarray) -> None:
    """Interface elements must form non-branching chains."""
    count: dict[int, int] = {}
    for n1, n2, _, _ in interfaces:
        count[int(n1)] = count.get(int(n1), 0) + 1
        count[int(n2)] = count.get(int(n2), 0) + 1
    if any(c > 2 for c in count.values()):
        raise MeshError("interface elements form a branching path")


# -- structured grids ------------------------------------------------------------


def _divisions(length: float, h: float, what: str) -> int:
    ratio = length / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(ratio, 1.0):
        raise MeshError(f"{what} ({length:g} mm) is not a multiple of the element size {h:g} mm")
    return n


def structured_grid(xs: Sequence[float], ys: Sequence[float], thickness: float = 1.0) -> Mesh:
    """Tensor-product grid of counter-clockwise quads (no boundary data)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise MeshError("grid lines must be strictly increasing")
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    n0 = (j * nx + i).ravel()
    quads = np.column_stack([n0, n0 + 1, n0 + nx + 1, n0 + nx])
    return Mesh(nodes, quads, None, np.empty((0, 4), dtype=np.int64), thickness=thickness)


def _find_node(nodes: np.ndarray, point, tol: float = 1e-9) -> int:
    d = np.hypot(nodes[:, 0] - point[0], nodes[:, 1] - point[1])
    i = int(np.argmin(d))
    if d[i] > tol * max(1.0, float(np.abs(nodes).max())):
        raise MeshError(f"no node at ({point[0]:g}, {point[1]:g})")
    return i


def _boundary_nodes(quads: np.ndarray) -> set[int]:
    edges: dict[tuple[int, int], int] = {}
    for q in quads:
        for a, b in zip(q, np.roll(q, -1)):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    out: set[int] = set()
    for (a, b), c in edges.items():
        if c == 1:
            out.update((int(a), int(b)))
    return out


def _path_chain(mesh: Mesh, polyline: Sequence[Sequence[float]]) -> list[int]:
    """Ordered node chain along a polyline that must follow element edges."""
    pts = np.asarray(polyline, dtype=float)
    nodes = mesh.nodes
    scale = max(1.0, float(np.abs(nodes).max()))
    chain = [_find_node(nodes, pts[0])]
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        seg_len = float(np.hypot(*d))
        if seg_len == 0.0:
            continue
        rel = nodes - a
        t = rel @ d / seg_len**2
        off = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / seg_len
        on = np.nonzero((off <= 1e-9 * scale) & (t > 1e-12) & (t <= 1.0 + 1e-12))[0]
        on = on[np.argsort(t[on])]
        if on.size == 0 or np.hypot(*(nodes[on[-1]] - b)) > 1e-9 * scale:
            raise MeshError("polyline vertex does not coincide with a mesh node")
        chain.extend(int(i) for i in on)
    edge_set = set()
    for q in mesh.quads:
        for u, v in zip(q, np.roll(q, -1)):
            edge_set.add((min(u, v), max(u, v)))
    for u, v in zip(chain[:-1], chain[1:]):
        if (min(u, v), max(u, v)) not in edge_set:
            raise MeshError("cohesive path is not aligned with element edges")
    if len(set(chain)) != len(chain):
        raise MeshError("cohesive path visits a node twice (branching or closed path)")
    return chain


def insert_cohesive_path(mesh: Mesh, polyline, free_edges: int = 0) -> Mesh:
    """Split the mesh along ``polyline`` and insert zero-thickness interfaces.

    Nodes inside the path are duplicated; a path end node is duplicated only
    when it lies on the mesh boundary.  Quads on the left of the path
    direction are rewired to the new nodes.  The first ``free_edges`` edges of
    the path become a traction-free slit (no interface element).
    """
    if polyline is None or len(polyline) == 0:
        return mesh
    chain = _path_chain(mesh, polyline)
    if len(chain) < 2:
        return mesh
    n_edges = len(chain) - 1
    if not 0 <= free_edges <= n_edges:
        raise MeshError("free_edges exceeds the number of path edges")
    boundary = _boundary_nodes(mesh.quads)
    nodes = mesh.nodes.copy()
    quads = mesh.quads.copy()
    pts = nodes[chain]
    new_nodes = []
    twin: dict[int, int] = {}
    for pos, node in enumerate(chain):
        is_end = pos in (0, n_edges)
        if is_end and node not in boundary:
            twin[node] = node
            continue
        # local path direction at this node
        lo, hi = max(pos - 1, 0), min(pos + 1, n_edges)
        tvec = pts[hi] - pts[lo]
        tvec = tvec / np.hypot(*tvec)
        dup = len(nodes) + len(new_nodes)
        new_nodes.append(nodes[node])
        twin[node] = dup
        for qi in np.nonzero(np.any(mesh.quads == node, axis=1))[0]:
            rel = nodes[mesh.quads[qi]].mean(axis=0) - nodes[node]
            if tvec[0] * rel[1] - tvec[1] * rel[0] > 0.0:
                quads[qi][quads[qi] == node] = dup
    if new_nodes:
        nodes = np.vstack([nodes, np.array(new_nodes)])
    inter = [list(mesh.interfaces[i]) for i in range(len(mesh.interfaces))]
    for e in range(free_edges, n_edges):
        a, b = chain[e], chain[e + 1]
        inter.append([a, b, twin[b], twin[a]])
    out = mesh.replace(nodes=nodes, quads=quads, interfaces=np.array(inter, dtype=np.int64).reshape(-1, 4))
    return out


def _remove_quads(mesh: Mesh, keep: np.ndarray) -> Mesh:
    quads = mesh.quads[keep]
    used = np.unique(quads)
    remap = -np.ones(mesh.n_nodes, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return mesh.replace(nodes=mesh.nodes[used], quads=remap[quads], quad_material=mesh.quad_material[keep])


# -- specimen generators -----------------------------------------------------------


def generate_notched_beam(
    span: float,
    depth: float,
    thickness: float,
    notch_depth: float = 0.0,
    notch_width: float = 0.0,
    elem_size: float = 10.0,
    response: str = "cmod",
    load: float = 1.0e4,
    cmod_gauge: float | None = None,
) -> Mesh:
    """Simply supported three-point bending beam with a mid-span cohesive ligament.

    The beam spans ``[0, span] x [0, depth]`` with supports at the two bottom
    corners and a downward point load at mid-span on top.  Interface elements
    run vertically from the notch tip to the top face.  A zero-width notch is
    a traction-free slit; a positive ``notch_width`` removes the material.

    Monitors are ``load`` (applied force) and either ``cmod`` (opening of the
    notch mouth, or of the mid-span bottom fibre when unnotched) or
    ``deflection`` (downward mid-span displacement of the bottom face).
    With ``cmod_gauge`` the opening is instead measured between two points
    of the bottom face ``cmod_gauge`` apart, centred on the ligament, as a
    clip gauge would; displacements between nodes are interpolated linearly.
    """
    if min(span, depth, thickness, elem_size) <= 0.0:
        raise MeshError("dimensions and element size must be positive")
    if not 0.0 <= notch_depth < depth:
        raise MeshError("notch depth must satisfy 0 <= notch_depth < depth")
    if notch_width < 0.0:
        raise MeshError("notch width must be >= 0")
    if response not in ("cmod", "deflection"):
        raise MeshError("response must be 'cmod' or 'deflection'")
    if cmod_gauge is not None and not notch_width < cmod_gauge < span:
        raise MeshError("cmod gauge must be wider than the notch and shorter than the span")
    half = 0.5 * span
    nx_half = _divisions(half, elem_size, "half span")
    ny = _divisions(depth, elem_size, "depth")
    n_notch = _divisions(notch_depth, elem_size, "notch depth") if notch_depth > 0 else 0
    if ny - n_notch < 3:
        raise MeshError(
            f"ligament of {depth - notch_depth:g} mm holds fewer than 3 interface elements "
            f"of size {elem_size:g} mm"
        )
    xs = np.linspace(0.0, span, 2 * nx_half + 1)
    ys = np.linspace(0.0, depth, ny + 1)
    mesh = structured_grid(xs, ys, thickness)
    if notch_width > 0.0:
        if notch_depth <= 0.0:
            raise MeshError("a notch width needs a positive notch depth")
        m = _divisions(0.5 * notch_width, elem_size, "half notch width")
        c = mesh.nodes[mesh.quads].mean(axis=1)
        cut = (np.abs(c[:, 0] - half) < m * elem_size) & (c[:, 1] < notch_depth)
        mesh = _remove_quads(mesh, ~cut)
        mesh = insert_cohesive_path(mesh, [(half, notch_depth), (half, depth)])
        nodes = mesh.nodes
        left = _find_node(nodes, (half - 0.5 * notch_width, 0.0))
        right = _find_node(nodes, (half + 0.5 * notch_width, 0.0))
        bottom_mid = _find_node(nodes, (half, notch_depth))
    else:
        mesh = insert_cohesive_path(mesh, [(half, 0.0), (half, depth)], free_edges=n_notch)
        nodes = mesh.nodes
        right = _find_node(nodes, (half, 0.0))
        left = _pair_partner(mesh, right)
        if _side_of(mesh, right, half) < 0:
            left, right = right, left
        bottom_mid = right
    top = _find_node(mesh.nodes, (half, depth))
    top_twin = _pair_partner(mesh, top)
    sup_l = _find_node(mesh.nodes, (0.0, 0.0))
    sup_r = _find_node(mesh.nodes, (span, 0.0))
    supports = ((sup_l, 0), (sup_l, 1), (sup_r, 1))
    load_nodes = [top] if top_twin == top else [top, top_twin]
    loads = tuple((n, 1, -load / len(load_nodes)) for n in load_nodes)
    control = Monitor("load", "force", tuple((n, 1, -1.0) for n in load_nodes))
    if response == "cmod" and cmod_gauge is not None:
        terms = [(n, 0, -c) for n, c in _bottom_point(mesh, half - 0.5 * cmod_gauge, half, left)]
        terms += [(n, 0, c) for n, c in _bottom_point(mesh, half + 0.5 * cmod_gauge, half, right)]
        resp = Monitor("cmod", "disp", tuple(terms))
    elif response == "cmod":
        resp = Monitor("cmod", "disp", ((left, 0, -1.0), (right, 0, 1.0)))
    else:
        resp = Monitor("deflection", "disp", ((bottom_mid, 1, -1.0),))
    return mesh.replace(supports=supports, loads=loads, monitors=(control, resp)).validate()


def _side_of(mesh: Mesh, node: int, x: float) -> int:
    """Sign of ``centroid_x - x`` of the quads attached to ``node``."""
    attached = np.any(mesh.quads == node, axis=1)
    cx = mesh.nodes[mesh.quads[attached]].mean(axis=1)[:, 0]
    return int(np.sign(cx.mean() - x))


def _bottom_point(mesh: Mesh, x: float, half: float, edge_node: int) -> list[tuple[int, float]]:
    """Linear-interpolation weights for a point of the bottom face on one side of mid-span."""
    nodes = mesh.nodes
    left = x < half
    used = np.zeros(len(nodes), dtype=bool)
    used[mesh.quads.ravel()] = True
    on_side = used & (np.abs(nodes[:, 1]) <= 1e-9) & ((nodes[:, 0] < half) if left else (nodes[:, 0] > half))
    cand = sorted(set(np.nonzero(on_side)[0].tolist()) | {edge_node}, key=lambda n: nodes[n, 0])
    xs = nodes[cand, 0]
    j = int(np.searchsorted(xs, x))
    if j < len(xs) and abs(xs[j] - x) <= 1e-9:
        return [(cand[j], 1.0)]
    if j == 0 or j == len(xs):
        raise MeshError(f"cmod gauge point x={x:g} lies outside the bottom face")
    t = (x - xs[j - 1]) / (xs[j] - xs[j - 1])
    return [(cand[j - 1], 1.0 - t), (cand[j], t)]


def _pair_partner(mesh: Mesh, node: int) -> int:
    """The coincident twin of ``node`` created by path splitting (or itself)."""
    d = np.hypot(*(mesh.nodes - mesh.nodes[node]).T)
    twins = [int(i) for i in np.nonzero(d <= 1e-12)[0] if i != node]
    return twins[0] if twins else node


def _graded_line(a: float, b: float, h: float) -> np.ndarray:
    n = max(1, int(math.ceil((b - a) / h - 1e-9)))
    return np.linspace(a, b, n + 1)


def generate_compact_tension(
    width: float,
    height: float,
    thickness: float,
    notch_length: float,
    elem_size_fine: float,
    elem_size_coarse: float,
    fine_band: float | None = None,
    load: float = 1.0e3,
) -> Mesh:
    """Compact tension plate ``[0, width] x [-height/2, height/2]``.

    A traction-free slit runs along ``y = 0`` from the left edge to
    ``x = notch_length``; interface elements continue it to the back edge at
    the fine element size.  An opening force pair acts on two pin nodes above
    and below the notch; the lower pin is held, the upper pin is restrained
    horizontally.  Monitors are ``load`` and ``cmod`` (vertical opening of
    the notch mouth at ``x = 0``).
    """
    if min(width, height, thickness, elem_size_fine, elem_size_coarse) <= 0.0:
        raise MeshError("dimensions and element sizes must be positive")
    if not 0.0 < notch_length < width:
        raise MeshError("notch length must satisfy 0 < notch_length < width")
    ligament = width - notch_length
    if ligament / elem_size_fine < 3.0 - 1e-9:
        raise MeshError(
            f"ligament of {ligament:g} mm holds fewer than 3 interface elements "
            f"of size {elem_size_fine:g} mm"
        )
    n_lig = _divisions(ligament, elem_size_fine, "ligament")
    band = fine_band if fine_band is not None else 5.0 * elem_size_fine
    band = min(band, 0.5 * height)
    if band < elem_size_fine:
        raise MeshError("fine zone must be at least one fine element high")
    xs = np.concatenate([_graded_line(0.0, notch_length, elem_size_coarse)[:-1],
                         np.linspace(notch_length, width, n_lig + 1)])
    y_fine = _graded_line(0.0, band, elem_size_fine)
    y_coarse = _graded_line(band, 0.5 * height, elem_size_coarse)[1:] if band < 0.5 * height else []
    y_pos = np.concatenate([y_fine, y_coarse])
    ys = np.concatenate([-y_pos[::-1], y_pos[1:]])
    mesh = structured_grid(xs, ys, thickness)
    n_notch = len(xs) - 1 - n_lig
    mesh = insert_cohesive_path(mesh, [(0.0, 0.0), (width, 0.0)], free_edges=n_notch)
    pin_x = xs[np.argmin(np.abs(xs - 0.5 * notch_length))]
    pin_y = y_pos[np.argmin(np.abs(y_pos - 0.25 * height))]
    nodes = mesh.nodes
    top_pin = _find_node(nodes, (pin_x, pin_y))
    bot_pin = _find_node(nodes, (pin_x, -pin_y))
    mouth_bot = _find_node(nodes, (0.0, 0.0))
    mouth_top = _pair_partner(mesh, mouth_bot)
    supports = ((bot_pin, 0), (bot_pin, 1), (top_pin, 0))
    loads = ((top_pin, 1, load),)
    control = Monitor("load", "force", ((top_pin, 1, 1.0),))
    resp = Monitor("cmod", "disp", ((mouth_bot, 1, -1.0), (mouth_top, 1, 1.0)))
    return mesh.replace(supports=supports, loads=loads, monitors=(control, resp)).validate()


# -- plain-text mesh format ------------------------------------------------------

_SECTIONS = ("THICKNESS", "NODES", "QUADS", "INTERFACES", "SUPPORTS", "LOADS", "MONITORS")


def write_mesh(mesh: Mesh, path) -> Path:
    """Write the mesh in the documented plain-text format (exact round trip)."""
    path = Path(path)
    r = lambda v: repr(float(v))  # noqa: E731
    lines = ["# sla_inverse mesh, units N-mm-MPa", "THICKNESS", r(mesh.thickness), "NODES"]
    lines += [f"{i} {r(x)} {r(y)}" for i, (x, y) in enumerate(mesh.nodes)]
    lines.append("QUADS")
    lines += [f"{i} {a} {b} {c} {d} {m}" for i, ((a, b, c, d), m) in
              enumerate(zip(mesh.quads, mesh.quad_material))]
    lines.append("INTERFACES")
    lines += [f"{i} {a} {b} {c} {d}" for i, (a, b, c, d) in enumerate(mesh.interfaces)]
    lines.append("SUPPORTS")
    lines += [f"{n} {DIR_NAMES[d]}" for n, d in mesh.supports]
    lines.append("LOADS")
    lines += [f"{n} {DIR_NAMES[d]} {r(v)}" for n, d, v in mesh.loads]
    lines.append("MONITORS")
    for mon in mesh.monitors:
        spec = " ".join(f"{n} {DIR_NAMES[d]} {r(c)}" for n, d, c in mon.terms)
        lines.append(f"{mon.name} {mon.kind} {spec}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _dir(token: str, where: str) -> int:
    try:
        return DIRS[token.lower()]
    except KeyError:
        raise MeshError(f"{where}: direction must be 'x' or 'y', got {token!r}") from None


def read_mesh(path) -> Mesh:
    """Parse a mesh file; errors name the offending line."""
    path = Path(path)
    data: dict[str, list] = {s: [] for s in _SECTIONS}
    section = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        tok = line.split()
        if tok[0].upper() in _SECTIONS and len(tok) == 1:
            section = tok[0].upper()
            continue
        if section is None:
            raise MeshError(f"{where}: data before the first section header")
        try:
            data[section].append(_parse_record(section, tok, where))
        except MeshError:
            raise
        except (ValueError, IndexError) as exc:
            raise MeshError(f"{where}: malformed {section} record: {line!r}") from exc

    def dense(records, what):
        ids = [rec[0] for rec in records]
        if ids != list(range(len(ids))):
            raise MeshError(f"{path}: {what} ids must be dense and ordered from 0")
        return [rec[1:] for rec in records]

    if len(data["THICKNESS"]) > 1:
        raise MeshError(f"{path}: THICKNESS given more than once")
    thickness = data["THICKNESS"][0] if data["THICKNESS"] else 1.0
    nodes = dense(data["NODES"], "node")
    quads = dense(data["QUADS"], "quad")
    inters = dense(data["INTERFACES"], "interface")
    mesh = Mesh(
        nodes=np.array(nodes, dtype=float).reshape(-1, 2),
        quads=np.array([q[:4] for q in quads], dtype=np.int64).reshape(-1, 4),
        quad_material=np.array([q[4] for q in quads], dtype=np.int64),
        interfaces=np.array(inters, dtype=np.int64).reshape(-1, 4),
        supports=tuple(data["SUPPORTS"]),
        loads=tuple(data["LOADS"]),
        monitors=tuple(data["MONITORS"]),
        thickness=thickness,
    )
    return mesh.validate()


def _parse_record(section: str, tok: list[str], where: str):
    if section == "THICKNESS":
        if len(tok) != 1:
            raise MeshError(f"{where}: THICKNESS takes one value")
        return float(tok[0])
    if section == "NODES":
        if len(tok) != 3:
            raise MeshError(f"{where}: NODES record needs 'id x y', got {len(tok)} fields")
        return (int(tok[0]), float(tok[1]), float(tok[2]))
    if section == "QUADS":
        if len(tok) != 6:
            raise MeshError(f"{where}: QUADS record needs 'id n1 n2 n3 n4 mat', got {len(tok)} fields")
        return tuple(int(t) for t in tok)
    if section == "INTERFACES":
        if len(tok) != 5:
            raise MeshError(f"{where}: INTERFACES record needs 'id n1 n2 n3 n4', got {len(tok)} fields")
        return tuple(int(t) for t in tok)
    if section == "SUPPORTS":
        if len(tok) != 2:
            raise MeshError(f"{where}: SUPPORTS record needs 'node dir'")
        return (int(tok[0]), _dir(tok[1], where))
    if section == "LOADS":
        if len(tok) != 3:
            raise MeshError(f"{where}: LOADS record needs 'node dir value'")
        return (int(tok[0]), _dir(tok[1], where), float(tok[2]))
    # MONITORS: name kind (node dir coeff)+
    if len(tok) < 5 or (len(tok) - 2) % 3:
        raise MeshError(f"{where}: MONITORS record needs 'name kind' plus node/dir/coeff triples")
    terms = tuple(
        (int(tok[i]), _dir(tok[i + 1], where), float(tok[i + 2])) for i in range(2, len(tok), 3)
    )
    return Monitor(tok[0], tok[1], terms)


def count_report(mesh: Mesh) -> str:
    return (
        f"nodes={mesh.n_nodes} quads={len(mesh.quads)} "
        f"interfaces={len(mesh.interfaces)} interface_ips={mesh.n_ips}"
    )

