// Mirrors of the service's scene JSON (schema_version 1). The client never
// does layout math; these types are read-only views of server responses.

export type Orientation = { r90: boolean; r180: boolean };

export type Placement = {
  x_cm: number;
  y_cm: number;
  orientation: Orientation;
  stack_base: string | null;
  z_cm: number;
};

export type Asset = {
  id: string;
  name: string;
  width_cm: number;
  depth_cm: number;
  height_cm: number;
  surface_index: number;
  style: string;
  material: string;
};

export type SurfaceInfo = {
  index: number;
  height_cm: number;
  area_cm2: number;
  boundary: [number, number][];
  bbox: { min_x: number; min_y: number; max_x: number; max_y: number };
};

export type Directive = {
  subject: string;
  kind: string;
  region?: string;
  reference?: string;
  relation?: string;
  direction?: string;
};

export type Scene = {
  schema_version: number;
  furniture: { mesh_ref: string | null; surfaces: SurfaceInfo[] };
  assets: Asset[];
  directives: Directive[];
  layout: Record<string, Placement>;
  bindings: Record<string, string>;
  provenance: { prompt: string; n_assets: number; seed: number };
};

export type JobBody = {
  prompt: string;
  n_assets: number;
  mesh_path?: string;
  mesh_obj?: string;
  seed?: number;
  params?: Record<string, number>;
};

export type JobResponse = { job_id: string; scene_id: string; status: string };

export type SceneResponse = {
  scene_id: string;
  revision: number;
  revisions: number;
  scene: Scene;
};

export type EditOp = {
  kind: "insert" | "remove" | "replace" | "resize" | "reposition" | "rotate";
  target?: string;
  asset?: {
    name: string;
    width_cm: number;
    depth_cm: number;
    height_cm: number;
    surface_index: number;
  };
  dims?: { width_cm: number; depth_cm: number; height_cm: number };
  directives?: Directive[];
  direction?: string;
};

export type EditResponse = SceneResponse & { ops: EditOp[] };

export type MetricsResponse = {
  oob_rate: number;
  bbl_m3: number;
  n_scenes: number;
};
