#!/usr/bin/env python3
"""Regenerate the synthetic scene fixtures under fixtures/.

Writes, per scene, `mesh.obj` + `annotations.json` (annotation schema v1) and
an `expected.json` holding brute-force values (per-node boxes, face counts,
grasp-region vertex means) computed here with numpy, independently of the
Rust loader. Object assets used by the insertion pipeline go to
fixtures/objects/.

Usage: python3 scripts/gen_fixtures.py [--root fixtures]
"""

import argparse
import json
import math
import os

import numpy as np


def fmt(x):
    # shortest repr that round-trips; avoid "-0.0"
    x = float(x)
    if x == 0.0:
        x = 0.0
    r = repr(x)
    return r[:-2] if r.endswith(".0") else r


class SceneBuilder:
    def __init__(self):
        self.vertices = []
        self.faces = []
        self.nodes = []
        self.articulations = []
        self._vkey = {}
        self._node = None

    def begin(self, node_id, label, kind, parent=None):
        self._node = {
            "id": node_id,
            "label": label,
            "kind": kind,
            "parent": parent,
            "faces": [],
            "regions": {},
        }
        self.nodes.append(self._node)
        self._vkey = {}
        return self._node

    def vert(self, p):
        key = tuple(round(float(c), 9) for c in p)
        if key not in self._vkey:
            self._vkey[key] = len(self.vertices)
            self.vertices.append(key)
        return self._vkey[key]

    def tri(self, a, b, c, region=None):
        fid = len(self.faces)
        self.faces.append((a, b, c))
        self._node["faces"].append(fid)
        if region:
            for r in region:
                self._node["regions"].setdefault(r, []).append(fid)
        return fid

    def grid(self, origin, u, v, nu, nv, region=None):
        o, u, v = np.array(origin, float), np.array(u, float), np.array(v, float)
        idx = [[self.vert(o + u * (i / nu) + v * (j / nv)) for j in range(nv + 1)]
               for i in range(nu + 1)]
        out = []
        for i in range(nu):
            for j in range(nv):
                a, b, c, d = idx[i][j], idx[i + 1][j], idx[i + 1][j + 1], idx[i][j + 1]
                out.append(self.tri(a, b, c, region))
                out.append(self.tri(a, c, d, region))
        return out

    def box(self, lo, hi, sub=(1, 1, 1), skip=(), region=None, top_sub=None):
        """Axis-aligned box with outward-facing triangles.

        skip: subset of {"bottom","top","front","back","left","right"}.
        front is y=min, back is y=max.
        """
        x0, y0, z0 = lo
        x1, y1, z1 = hi
        dx, dy, dz = x1 - x0, y1 - y0, z1 - z0
        sx, sy, sz = sub
        tx, ty = top_sub if top_sub else (sx, sy)
        sides = {
            "bottom": ((x0, y0, z0), (0, dy, 0), (dx, 0, 0), sy, sx),
            "top": ((x0, y0, z1), (dx, 0, 0), (0, dy, 0), tx, ty),
            "front": ((x0, y0, z0), (dx, 0, 0), (0, 0, dz), sx, sz),
            "back": ((x0, y1, z0), (0, 0, dz), (dx, 0, 0), sz, sx),
            "left": ((x0, y0, z0), (0, 0, dz), (0, dy, 0), sz, sy),
            "right": ((x1, y0, z0), (0, dy, 0), (0, 0, dz), sy, sz),
        }
        out = []
        for name in ("bottom", "top", "front", "back", "left", "right"):
            if name in skip:
                continue
            o, u, v, nu, nv = sides[name]
            out += self.grid(o, u, v, nu, nv, region)
        return out

    def tube_x(self, x0, x1, cy, cz, radius, segments, region=None):
        """Open cylinder along +x (a bar handle); normals point outward."""
        ring0, ring1 = [], []
        for k in range(segments):
            t = 2 * math.pi * k / segments
            y, z = cy + radius * math.cos(t), cz + radius * math.sin(t)
            ring0.append(self.vert((x0, y, z)))
            ring1.append(self.vert((x1, y, z)))
        for k in range(segments):
            a, b = ring0[k], ring0[(k + 1) % segments]
            c, d = ring1[(k + 1) % segments], ring1[k]
            self.tri(a, c, b, region)
            self.tri(a, d, c, region)

    def articulate(self, part_id, joint_type, axis, pivot, rng):
        self.articulations.append({
            "part_id": part_id,
            "joint_type": joint_type,
            "axis": list(axis),
            "pivot": list(pivot),
            "range": list(rng),
        })

    # ------------------------------------------------------------------ output

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "mesh.obj"), "w") as f:
            f.write("# synthetic fixture, z-up, meters\n")
            for v in self.vertices:
                f.write("v %s %s %s\n" % tuple(fmt(c) for c in v))
            for a, b, c in self.faces:
                f.write("f %d %d %d\n" % (a + 1, b + 1, c + 1))
        nodes = []
        for n in self.nodes:
            nodes.append({
                "id": n["id"],
                "label": n["label"],
                "kind": n["kind"],
                "parent": n["parent"],
                "faces": sorted(n["faces"]),
                "regions": {k: sorted(v) for k, v in sorted(n["regions"].items())},
            })
        ann = {"version": "1", "nodes": nodes, "articulations": self.articulations}
        with open(os.path.join(out_dir, "annotations.json"), "w") as f:
            json.dump(ann, f, indent=2)
            f.write("\n")
        with open(os.path.join(out_dir, "expected.json"), "w") as f:
            json.dump(self.expected(), f, indent=2, sort_keys=True)
            f.write("\n")

    def expected(self):
        V = np.array(self.vertices, float)
        F = np.array(self.faces, int)
        exp = {"face_count": len(self.faces), "vertex_count": len(self.vertices), "nodes": {}}
        for n in self.nodes:
            used = np.unique(F[n["faces"]].ravel())
            entry = {
                "face_count": len(n["faces"]),
                "aabb_min": V[used].min(axis=0).tolist(),
                "aabb_max": V[used].max(axis=0).tolist(),
            }
            g = n["regions"].get("graspable")
            if g:
                gv = np.unique(F[g].ravel())
                entry["grasp_mean"] = V[gv].mean(axis=0).tolist()
            exp["nodes"][n["id"]] = entry
        return exp


# ---------------------------------------------------------------------- scenes


def cube():
    s = SceneBuilder()
    s.begin("box_1", "box", "object")
    s.box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    return s


def add_cabinet(s, ox, oy):
    """Cabinet carcass (open front) + drawer_7 part with a bar handle."""
    s.begin("cabinet_1", "cabinet", "object")
    s.box((ox, oy, 0.0), (ox + 0.6, oy + 0.5, 0.8), sub=(4, 3, 4), skip=("front",),
          region=("fixed",))
    s.begin("drawer_7", "drawer", "part", parent="cabinet_1")
    # drawer tray: open top, front panel at y = oy
    s.box((ox + 0.05, oy, 0.55), (ox + 0.55, oy + 0.45, 0.75), sub=(4, 4, 2), skip=("top",),
          region=("movable",))
    s.tube_x(ox + 0.2, ox + 0.4, oy - 0.03, 0.65, 0.01, 12, region=("movable", "graspable"))
    s.articulate("drawer_7", "prismatic", (0.0, -1.0, 0.0), (ox + 0.3, oy, 0.65), (0.0, 0.4))


def cabinet():
    s = SceneBuilder()
    add_cabinet(s, 0.0, 0.0)
    return s


def add_room(s, w, d, h, walls=("wall_1", "wall_2"), ceiling=False):
    s.begin("floor_1", "floor", "object")
    s.grid((0, 0, 0), (w, 0, 0), (0, d, 0), 8, 8)
    if "wall_1" in walls:
        # y = 0, interior normal +y
        s.begin("wall_1", "wall", "object")
        s.grid((0, 0, 0), (0, 0, h), (w, 0, 0), 5, 8)
    if "wall_2" in walls:
        # x = 0, interior normal +x
        s.begin("wall_2", "wall", "object")
        s.grid((0, 0, 0), (0, d, 0), (0, 0, h), 8, 5)
    if ceiling:
        s.begin("ceiling_1", "ceiling", "object")
        s.grid((0, 0, h), (0, d, 0), (w, 0, 0), 8, 8)


def add_table(s, node_id, label, lo_xy, hi_xy, top_z, thick=0.03, leg=0.05):
    s.begin(node_id, label, "object")
    (x0, y0), (x1, y1) = lo_xy, hi_xy
    s.box((x0, y0, top_z - thick), (x1, y1, top_z), sub=(1, 1, 1), top_sub=(8, 6))
    for (lx, ly) in ((x0, y0), (x1 - leg, y0), (x0, y1 - leg), (x1 - leg, y1 - leg)):
        s.box((lx, ly, 0.0), (lx + leg, ly + leg, top_z - thick), skip=("top", "bottom"))


def office():
    s = SceneBuilder()
    add_room(s, 4.0, 4.0, 2.5, ceiling=True)
    add_table(s, "desk_1", "desk", (2.0, 2.0), (3.2, 2.8), 0.75)
    s.begin("bin_2", "trash can", "object")
    s.box((3.4, 0.5, 0.0), (3.7, 0.8, 0.4), sub=(3, 3, 4), skip=("top",))
    add_cabinet(s, 1.0, 1.0)
    return s


def bedroom():
    s = SceneBuilder()
    add_room(s, 4.0, 4.0, 2.5)
    s.begin("bed_3", "bed", "object")
    s.box((1.0, 1.0, 0.0), (3.0, 2.6, 0.5), sub=(4, 4, 1), skip=("bottom",), top_sub=(10, 8))
    s.begin("nightstand_4", "nightstand", "object")
    s.box((3.2, 1.0, 0.0), (3.7, 1.5, 0.55), sub=(2, 2, 2), skip=("bottom",))
    s.begin("teddy_5", "teddy bear", "object")
    # floats 3 cm above the mattress, in the bed's far corner
    s.box((1.1, 2.2, 0.53), (1.4, 2.5, 0.83), sub=(2, 2, 2))
    return s


def desk():
    s = SceneBuilder()
    add_room(s, 3.0, 3.0, 2.5, walls=("wall_1",))
    add_table(s, "desk_1", "desk", (1.0, 1.0), (2.2, 1.7), 0.75)
    s.begin("chair_2", "chair", "object")
    s.box((1.4, 1.9, 0.0), (1.85, 2.35, 0.45), sub=(2, 2, 2), skip=("bottom",))
    return s


def obstacle():
    s = SceneBuilder()
    add_room(s, 3.0, 3.0, 2.5, walls=("wall_1",))
    add_table(s, "table_1", "table", (1.0, 1.0), (2.0, 1.8), 0.75)
    s.begin("book_1", "book", "object")
    # covers the table-top centroid (1.5, 1.4)
    s.box((1.35, 1.25, 0.75), (1.65, 1.55, 0.79), sub=(2, 2, 1), skip=("bottom",))
    return s


# --------------------------------------------------------------------- objects


def write_obj(path, verts, faces):
    with open(path, "w") as f:
        for v in verts:
            f.write("v %s %s %s\n" % tuple(fmt(c) for c in v))
        for a, b, c in faces:
            f.write("f %d %d %d\n" % (a + 1, b + 1, c + 1))


def box_object(lo, hi):
    s = SceneBuilder()
    s.begin("o", "o", "object")
    s.box(lo, hi)
    return s.vertices, s.faces


def cylinder_object(radius, height, segments=16):
    verts = [(0.0, 0.0, 0.0), (0.0, 0.0, height)]
    for k in range(segments):
        t = 2 * math.pi * k / segments
        x, y = round(radius * math.cos(t), 9), round(radius * math.sin(t), 9)
        verts.append((x, y, 0.0))
        verts.append((x, y, height))
    faces = []
    for k in range(segments):
        b0, t0 = 2 + 2 * k, 3 + 2 * k
        b1, t1 = 2 + 2 * ((k + 1) % segments), 3 + 2 * ((k + 1) % segments)
        faces += [(b0, b1, t1), (b0, t1, t0), (0, b1, b0), (1, t0, t1)]
    return verts, faces


def objects(root):
    out = os.path.join(root, "objects")
    os.makedirs(out, exist_ok=True)
    # object origins sit at the bottom centre, except `pillow` (offset on purpose)
    write_obj(os.path.join(out, "pillow.obj"), *box_object((-0.3, -0.15, 0.0), (0.3, 0.15, 0.1)))
    write_obj(os.path.join(out, "pillow_huge.obj"), *box_object((-4, -2, 0), (4, 2, 1.5)))
    write_obj(os.path.join(out, "poster.obj"), *box_object((-0.01, -0.3, -0.45), (0.01, 0.3, 0.45)))
    write_obj(os.path.join(out, "bottle.obj"), *cylinder_object(0.035, 0.25))
    write_obj(os.path.join(out, "mug.obj"), *cylinder_object(0.045, 0.1))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    args = ap.parse_args()
    scenes = {
        "cube": cube,
        "cabinet": cabinet,
        "office": office,
        "bedroom": bedroom,
        "desk": desk,
        "obstacle": obstacle,
    }
    for name, build in scenes.items():
        build().write(os.path.join(args.root, "scenes", name))
    objects(args.root)


if __name__ == "__main__":
    main()
