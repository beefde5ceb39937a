"""Structured layered meshes for three-point-bend specimens.

Each ply is meshed with its own stack of hexahedra; nodes are duplicated on
every ply-to-ply plane and reconnected through zero-thickness cohesive
elements, integrated at the four node pairs (2x2 Newton-Cotes on the
midsurface). The x grid places nodes exactly on the support and load lines
whenever the in-plane resolution allows it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import json

import numpy as np

RESIN = "resin"
BP = "bp"

# interface property ids used in mesh arrays
PROP_RESIN = 0
PROP_BP = 1


class MeshError(ValueError):
    """Spec or density combination that cannot produce a valid mesh."""


@dataclass(frozen=True)
class LaminateSpec:
    """Stacking sequence, interface types and bend-test geometry (mm)."""

    ply_angles: tuple
    ply_thickness: float
    interface_types: tuple
    length: float
    width: float
    thickness: float
    span: float
    label: str = ""
    symmetric: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ply_angles", tuple(float(a) for a in self.ply_angles))
        object.__setattr__(self, "interface_types",
                           tuple(str(t).lower() for t in self.interface_types))
        n = len(self.ply_angles)
        if n < 1:
            raise MeshError("need at least one ply")
        if abs(n * self.ply_thickness - self.thickness) > 1e-9 * max(1.0, self.thickness):
            raise MeshError(
                f"{n} plies x {self.ply_thickness} mm != thickness {self.thickness} mm")
        if len(self.interface_types) != n - 1:
            raise MeshError(
                f"expected {n - 1} interface entries, got {len(self.interface_types)}")
        bad = [t for t in self.interface_types if t not in (RESIN, BP)]
        if bad:
            raise MeshError(f"unknown interface types {bad}; use 'resin' or 'bp'")
        if not (0.0 < self.span < self.length):
            raise MeshError("span must be positive and smaller than the length")
        if self.width <= 0.0 or self.ply_thickness <= 0.0:
            raise MeshError("width and ply thickness must be positive")
        if self.symmetric:
            if self.ply_angles != tuple(reversed(self.ply_angles)):
                raise MeshError("symmetric spec claimed but ply angles do not mirror")
            if self.interface_types != tuple(reversed(self.interface_types)):
                raise MeshError("symmetric spec claimed but interfaces do not mirror")

    @property
    def n_plies(self) -> int:
        return len(self.ply_angles)

    @property
    def bp_interfaces(self) -> tuple:
        return tuple(i for i, t in enumerate(self.interface_types) if t == BP)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LaminateSpec":
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LaminateSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def symmetric_spec(half_angles, bp_half_interfaces=(), span=80.0, label="",
                   ply_thickness=0.25, length=140.0, width=14.0,
                   bp_midplane=False) -> LaminateSpec:
    """Build a symmetric laminate from its half stack.

    `bp_half_interfaces` lists interface indices in the half stack (0 between
    plies 0 and 1, ...); each is mirrored. `bp_midplane` additionally places
    an interleaf on the midplane.
    """
    half = [float(a) for a in half_angles]
    angles = half + list(reversed(half))
    n = len(angles)
    kinds = [RESIN] * (n - 1)
    for i in bp_half_interfaces:
        kinds[i] = BP
        kinds[n - 2 - i] = BP
    if bp_midplane:
        kinds[n // 2 - 1] = BP
    return LaminateSpec(
        ply_angles=tuple(angles), ply_thickness=ply_thickness,
        interface_types=tuple(kinds), length=length, width=width,
        thickness=n * ply_thickness, span=span, label=label,
    )


def builtin_specs(span: float = 80.0) -> dict:
    """The four experimental configurations, keyed by their usual names."""
    half = [90, 0, 45, -45, 0, 90]
    return {
        "baseline_12_0": symmetric_spec(half, (), span, "baseline_12_0"),
        "hybrid_12_2": symmetric_spec(half, (1,), span, "hybrid_12_2"),
        "hybrid_12_3": symmetric_spec(half, (1,), span, "hybrid_12_3", bp_midplane=True),
        "hybrid_12_4": symmetric_spec(half, (1, 4), span, "hybrid_12_4"),
    }


@dataclass
class MeshModel:
    """Layered structured mesh with duplicated interface planes."""

    nodes: np.ndarray            # (n_nodes, 3)
    hexes: np.ndarray            # (n_el, 8) int32, ply-grouped ordering
    elem_ply: np.ndarray         # (n_el,) int16
    elem_dims: np.ndarray        # (n_el, 3) dx, dy, dz
    elem_Lc: np.ndarray          # (n_el,) cube root of volume
    ply_angles: np.ndarray       # (n_plies,)
    pairs: np.ndarray            # (n_pairs, 2) int32: node below, node above
    pair_area: np.ndarray        # (n_pairs,)
    pair_prop: np.ndarray        # (n_pairs,) int8: 0 resin, 1 bp
    pair_interface: np.ndarray   # (n_pairs,) int16
    interface_quads: np.ndarray  # (n_iface_el, 8) int32 (4 below + 4 above)
    quad_prop: np.ndarray        # (n_iface_el,) int8
    quad_interface: np.ndarray   # (n_iface_el,) int16
    left_support: np.ndarray     # node ids, bottom surface
    right_support: np.ndarray
    load_line: np.ndarray        # node ids, top surface
    spec: LaminateSpec
    grid_shape: tuple = field(default=())

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.hexes.shape[0]

    @property
    def n_interfaces(self) -> int:
        return self.spec.n_plies - 1


def _axis_coords(breaks, target) -> np.ndarray:
    """Subdivide consecutive breakpoints with roughly `target`-sized cells."""
    coords = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(round((b - a) / target)))
        coords.extend(np.linspace(a, b, n + 1)[1:])
    return np.asarray(coords)


def build_mesh(spec: LaminateSpec, target_density: float = 1.0,
               through_thickness_per_ply: int = 1) -> MeshModel:
    """Structured mesh at ~`target_density` elements/mm^3.

    `through_thickness_per_ply` fixes the z resolution; the in-plane cell
    size then follows from the density. Node columns are placed exactly on
    the support and load lines when the grid is fine enough to honor them,
    otherwise the sets snap to the nearest column.
    """
    if target_density <= 0.0 or through_thickness_per_ply < 1:
        raise MeshError("density and through-thickness count must be positive")
    dz = spec.ply_thickness / through_thickness_per_ply
    area = 1.0 / (target_density * dz)
    dxy = float(np.sqrt(area))
    aspect = max(dxy / dz, dz / dxy)
    if aspect > 120.0:
        raise MeshError(
            f"element aspect ratio {aspect:.0f} (in-plane {dxy:.3g} mm vs "
            f"thickness {dz:.3g} mm) is degenerate; adjust density or subdivision")

    half_L, half_s = spec.length / 2.0, spec.span / 2.0
    breaks = [-half_L, -half_s, 0.0, half_s, half_L]
    seg_ok = all(round((b - a) / dxy) >= 1 for a, b in zip(breaks[:-1], breaks[1:]))
    if seg_ok:
        xs = _axis_coords(breaks, dxy)
    else:
        nx = max(1, int(round(spec.length / dxy)))
        xs = np.linspace(-half_L, half_L, nx + 1)
    ny = max(1, int(round(spec.width / dxy)))
    ys = np.linspace(-spec.width / 2.0, spec.width / 2.0, ny + 1)

    n_plies = spec.n_plies
    tpp = through_thickness_per_ply
    # z sheets: tpp+1 per ply, planes duplicated between plies
    sheet_z = []
    ply_bottom_sheet = []
    for p in range(n_plies):
        z0 = p * spec.ply_thickness
        ply_bottom_sheet.append(len(sheet_z))
        sheet_z.extend(z0 + dz * k for k in range(tpp + 1))
    sheet_z = np.asarray(sheet_z)
    n_sheets = len(sheet_z)

    nxn, nyn = len(xs), len(ys)
    plane = nxn * nyn
    nodes = np.empty((n_sheets * plane, 3))
    X, Y = np.meshgrid(xs, ys, indexing="xy")  # iy rows, ix cols
    for s in range(n_sheets):
        blk = nodes[s * plane:(s + 1) * plane]
        blk[:, 0] = X.ravel()
        blk[:, 1] = Y.ravel()
        blk[:, 2] = sheet_z[s]

    def nid(sheet, iy, ix):
        return sheet * plane + iy * nxn + ix

    dx_cells = np.diff(xs)
    dy_cells = np.diff(ys)
    nex, ney = len(dx_cells), len(dy_cells)

    hexes = []
    elem_ply = []
    elem_dims = []
    for p in range(n_plies):
        for k in range(tpp):
            sb = ply_bottom_sheet[p] + k
            st = sb + 1
            for iy in range(ney):
                for ix in range(nex):
                    hexes.append((
                        nid(sb, iy, ix), nid(sb, iy, ix + 1),
                        nid(sb, iy + 1, ix + 1), nid(sb, iy + 1, ix),
                        nid(st, iy, ix), nid(st, iy, ix + 1),
                        nid(st, iy + 1, ix + 1), nid(st, iy + 1, ix),
                    ))
                    elem_ply.append(p)
                    elem_dims.append((dx_cells[ix], dy_cells[iy], dz))
    hexes = np.asarray(hexes, dtype=np.int32)
    elem_ply = np.asarray(elem_ply, dtype=np.int16)
    elem_dims = np.asarray(elem_dims)
    elem_Lc = np.cbrt(elem_dims[:, 0] * elem_dims[:, 1] * elem_dims[:, 2])

    # cohesive node pairs with tributary areas, plus quad connectivity
    pairs, pair_area, pair_prop, pair_if = [], [], [], []
    quads, quad_prop, quad_if = [], [], []
    for i, kind in enumerate(spec.interface_types):
        prop = PROP_BP if kind == BP else PROP_RESIN
        s_below = ply_bottom_sheet[i] + tpp       # top sheet of lower ply
        s_above = ply_bottom_sheet[i + 1]         # bottom sheet of upper ply
        for iy in range(nyn):
            wy = 0.0
            if iy > 0:
                wy += dy_cells[iy - 1] / 2.0
            if iy < ney:
                wy += dy_cells[iy] / 2.0
            for ix in range(nxn):
                wx = 0.0
                if ix > 0:
                    wx += dx_cells[ix - 1] / 2.0
                if ix < nex:
                    wx += dx_cells[ix] / 2.0
                pairs.append((nid(s_below, iy, ix), nid(s_above, iy, ix)))
                pair_area.append(wx * wy)
                pair_prop.append(prop)
                pair_if.append(i)
        for iy in range(ney):
            for ix in range(nex):
                quads.append((
                    nid(s_below, iy, ix), nid(s_below, iy, ix + 1),
                    nid(s_below, iy + 1, ix + 1), nid(s_below, iy + 1, ix),
                    nid(s_above, iy, ix), nid(s_above, iy, ix + 1),
                    nid(s_above, iy + 1, ix + 1), nid(s_above, iy + 1, ix),
                ))
                quad_prop.append(prop)
                quad_if.append(i)

    def column_nodes(sheet, x_target):
        ix = int(np.argmin(np.abs(xs - x_target)))
        return np.array([nid(sheet, iy, ix) for iy in range(nyn)], dtype=np.int64)

    left = column_nodes(0, -half_s)
    right = column_nodes(0, half_s)
    load = column_nodes(n_sheets - 1, 0.0)

    return MeshModel(
        nodes=nodes, hexes=hexes, elem_ply=elem_ply, elem_dims=elem_dims,
        elem_Lc=elem_Lc, ply_angles=np.asarray(spec.ply_angles),
        pairs=np.asarray(pairs, dtype=np.int32).reshape(-1, 2),
        pair_area=np.asarray(pair_area),
        pair_prop=np.asarray(pair_prop, dtype=np.int8),
        pair_interface=np.asarray(pair_if, dtype=np.int16),
        interface_quads=(np.asarray(quads, dtype=np.int32).reshape(-1, 8)
                         if quads else np.zeros((0, 8), dtype=np.int32)),
        quad_prop=np.asarray(quad_prop, dtype=np.int8),
        quad_interface=np.asarray(quad_if, dtype=np.int16),
        left_support=left, right_support=right, load_line=load,
        spec=spec, grid_shape=(nex, ney, n_plies * tpp),
    )
