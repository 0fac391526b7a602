// Pure revision diff: which assets appeared, vanished, moved, changed size
// or changed identity/style between two scene revisions.

import type { Scene } from "./types.js";

export type SceneDiff = {
  added: string[];
  removed: string[];
  moved: string[];
  resized: string[];
  restyled: string[];
};

const POS_TOL_CM = 1e-6;

export function diffScenes(prev: Scene, next: Scene): SceneDiff {
  const prevAssets = new Map(prev.assets.map((a) => [a.id, a]));
  const nextAssets = new Map(next.assets.map((a) => [a.id, a]));

  const added = [...nextAssets.keys()].filter((id) => !prevAssets.has(id)).sort();
  const removed = [...prevAssets.keys()].filter((id) => !nextAssets.has(id)).sort();

  const moved: string[] = [];
  const resized: string[] = [];
  const restyled: string[] = [];
  for (const [id, a] of nextAssets) {
    const before = prevAssets.get(id);
    if (!before) continue;
    const p0 = prev.layout[id];
    const p1 = next.layout[id];
    if (p0 && p1) {
      const movedBy =
        Math.abs(p1.x_cm - p0.x_cm) + Math.abs(p1.y_cm - p0.y_cm);
      const turned =
        p1.orientation.r90 !== p0.orientation.r90 ||
        p1.orientation.r180 !== p0.orientation.r180;
      if (movedBy > POS_TOL_CM || turned || p1.stack_base !== p0.stack_base) {
        moved.push(id);
      }
    }
    if (
      before.width_cm !== a.width_cm ||
      before.depth_cm !== a.depth_cm ||
      before.height_cm !== a.height_cm
    ) {
      resized.push(id);
    }
    if (
      before.name !== a.name ||
      before.style !== a.style ||
      before.material !== a.material
    ) {
      restyled.push(id);
    }
  }
  moved.sort();
  resized.sort();
  restyled.sort();
  return { added, removed, moved, resized, restyled };
}

export function emptyDiff(): SceneDiff {
  return { added: [], removed: [], moved: [], resized: [], restyled: [] };
}

export function describeDiff(diff: SceneDiff): string {
  const parts: string[] = [];
  if (diff.added.length) parts.push(`added ${diff.added.join(", ")}`);
  if (diff.removed.length) parts.push(`removed ${diff.removed.join(", ")}`);
  if (diff.moved.length) parts.push(`moved ${diff.moved.join(", ")}`);
  if (diff.resized.length) parts.push(`resized ${diff.resized.join(", ")}`);
  if (diff.restyled.length) parts.push(`changed ${diff.restyled.join(", ")}`);
  return parts.length ? parts.join("; ") : "no changes";
}
