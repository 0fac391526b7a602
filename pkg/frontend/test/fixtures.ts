// Shared test fixtures: a minimal scene and an OBJ generator matching the
// service's input contract (cm, Z-up, front at -Y).

import type { Asset, Placement, Scene } from "../src/types.js";

export function boxObj(
  x0: number, x1: number, y0: number, y1: number, z0: number, z1: number,
  offset = 0,
): { verts: string[]; faces: string[] } {
  const v = [
    [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
    [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
  ];
  const quads = [
    [1, 4, 3, 2], [5, 6, 7, 8], [1, 2, 6, 5],
    [3, 4, 8, 7], [2, 3, 7, 6], [4, 1, 5, 8],
  ];
  return {
    verts: v.map((p) => `v ${p[0]} ${p[1]} ${p[2]}`),
    faces: quads.map((q) => `f ${q.map((i) => i + offset).join(" ")}`),
  };
}

export function deskWithShelfObj(): string {
  const desk = boxObj(0, 120, 0, 60, 0, 75);
  const shelf = boxObj(20, 100, 40, 60, 105, 110, 8);
  return [...desk.verts, ...shelf.verts, ...desk.faces, ...shelf.faces].join("\n") + "\n";
}

function asset(id: string, w: number, d: number, h: number, surface = 0): Asset {
  return {
    id, name: id.replace(/-/g, " "), width_cm: w, depth_cm: d, height_cm: h,
    surface_index: surface, style: "Modern", material: "wood",
  };
}

function placed(x: number, y: number, r90 = false, stack: string | null = null): Placement {
  return {
    x_cm: x, y_cm: y, orientation: { r90, r180: false },
    stack_base: stack, z_cm: 75,
  };
}

export function sampleScene(): Scene {
  return {
    schema_version: 1,
    furniture: {
      mesh_ref: null,
      surfaces: [
        {
          index: 0, height_cm: 75, area_cm2: 7200,
          boundary: [[120, 0], [0, 0], [0, 60], [120, 60]],
          bbox: { min_x: 0, min_y: 0, max_x: 120, max_y: 60 },
        },
      ],
    },
    assets: [
      asset("table-lamp", 18, 18, 40),
      asset("alarm-clock", 12, 6, 12),
      asset("decorative-box", 25, 18, 12),
    ],
    directives: [
      { subject: "alarm-clock", kind: "distance", relation: "near", reference: "table-lamp" },
    ],
    layout: {
      "table-lamp": placed(20, 30),
      "alarm-clock": placed(40, 30),
      "decorative-box": placed(90, 30, true),
    },
    bindings: {},
    provenance: { prompt: "test", n_assets: 3, seed: 0 },
  };
}
