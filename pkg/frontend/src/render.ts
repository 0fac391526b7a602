// Client-side redraw of one surface from layout JSON, mirroring the
// service's SVG conventions (1 unit = 1 cm, front edge at the bottom,
// stacked assets red). Returns an SVG string; the app injects it and wires
// interactivity through the data-asset attributes.

import type { SceneDiff } from "./diff.js";
import type { Scene } from "./types.js";

export type RenderOptions = {
  selected?: string | null;
  diff?: SceneDiff | null;
};

const PAD = 5;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function f(v: number): string {
  return v.toFixed(2);
}

export function renderSurfaceSvg(
  scene: Scene,
  surfaceIndex: number,
  opts: RenderOptions = {},
): string {
  const surface = scene.furniture.surfaces.find((s) => s.index === surfaceIndex);
  if (!surface) {
    throw new Error(`no surface with index ${surfaceIndex}`);
  }
  const { min_x, min_y, max_x, max_y } = surface.bbox;
  const width = max_x - min_x + 2 * PAD;
  const height = max_y - min_y + 2 * PAD;
  const fx = (x: number) => f(x - min_x + PAD);
  const fy = (y: number) => f(max_y - y + PAD);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${f(width)} ${f(height)}" ` +
      `width="${f(width)}" height="${f(height)}">`,
    `<rect x="0" y="0" width="${f(width)}" height="${f(height)}" fill="#ffffff"/>`,
  ];

  const boundary = surface.boundary
    .map(([x, y]) => `${fx(x)},${fy(y)}`)
    .join(" ");
  parts.push(
    `<polygon points="${boundary}" fill="#f7f5f0" stroke="#444444" stroke-width="0.8"/>`,
  );

  for (const i of [1, 2]) {
    const gx = min_x + ((max_x - min_x) * i) / 3;
    const gy = min_y + ((max_y - min_y) * i) / 3;
    parts.push(
      `<line x1="${fx(gx)}" y1="${fy(min_y)}" x2="${fx(gx)}" y2="${fy(max_y)}" ` +
        `stroke="#bbbbbb" stroke-width="0.4" stroke-dasharray="3,3"/>`,
      `<line x1="${fx(min_x)}" y1="${fy(gy)}" x2="${fx(max_x)}" y2="${fy(gy)}" ` +
        `stroke="#bbbbbb" stroke-width="0.4" stroke-dasharray="3,3"/>`,
    );
  }

  const diff = opts.diff ?? null;
  const onSurface = scene.assets
    .filter((a) => a.surface_index === surfaceIndex)
    .map((a) => ({ asset: a, placement: scene.layout[a.id] }))
    .filter((e) => e.placement)
    .sort((a, b) => {
      const level = (p: { stack_base: string | null }) => (p.stack_base ? 1 : 0);
      const d = level(a.placement) - level(b.placement);
      return d !== 0 ? d : a.asset.id.localeCompare(b.asset.id);
    });

  for (const { asset, placement } of onSurface) {
    const r90 = placement.orientation.r90;
    const w = r90 ? asset.depth_cm : asset.width_cm;
    const d = r90 ? asset.width_cm : asset.depth_cm;
    const x0 = placement.x_cm - w / 2;
    const y1 = placement.y_cm + d / 2;
    const stacked = placement.stack_base !== null;
    const fill = stacked ? "#f2b8b5" : "#cfe3f5";
    let stroke = stacked ? "#c0392b" : "#34495e";
    let strokeWidth = 0.6;
    let dash = "";
    if (diff) {
      if (diff.added.includes(asset.id)) {
        stroke = "#1e8e3e";
        strokeWidth = 1.4;
      } else if (diff.moved.includes(asset.id)) {
        stroke = "#e8710a";
        strokeWidth = 1.4;
        dash = ` stroke-dasharray="2,1.5"`;
      } else if (
        diff.resized.includes(asset.id) ||
        diff.restyled.includes(asset.id)
      ) {
        stroke = "#8430ce";
        strokeWidth = 1.4;
      }
    }
    if (opts.selected === asset.id) {
      stroke = "#1a73e8";
      strokeWidth = 1.8;
    }
    const yaw =
      (placement.orientation.r90 ? 90 : 0) + (placement.orientation.r180 ? 180 : 0);
    const tooltip =
      `${asset.name} — ${asset.style || "unstyled"} ${asset.material || ""}`.trim() +
      ` — ${asset.width_cm}×${asset.depth_cm}×${asset.height_cm} cm, yaw ${yaw}°`;
    parts.push(
      `<g data-asset="${esc(asset.id)}" cursor="pointer">` +
        `<rect x="${fx(x0)}" y="${fy(y1)}" width="${f(w)}" height="${f(d)}" ` +
        `fill="${fill}" stroke="${stroke}" stroke-width="${f(strokeWidth)}"${dash}/>` +
        `<title>${esc(tooltip)}</title>` +
        arrow(placement.x_cm, placement.y_cm, yaw, Math.min(w, d) * 0.35, fx, fy, stroke) +
        `<text x="${fx(placement.x_cm)}" y="${fy(placement.y_cm - d * 0.28)}" ` +
        `font-size="${f(Math.max(2.5, Math.min(6, w * 0.16)))}" text-anchor="middle" ` +
        `fill="#222222" font-family="sans-serif">${esc(asset.name)}</text>` +
        `</g>`,
    );
  }

  parts.push("</svg>");
  return parts.join("\n");
}

function arrow(
  cx: number,
  cy: number,
  yawDeg: number,
  len: number,
  fx: (x: number) => string,
  fy: (y: number) => string,
  stroke: string,
): string {
  const yaw = (yawDeg * Math.PI) / 180;
  const dx = len * Math.sin(yaw);
  const dy = -len * Math.cos(yaw);
  return (
    `<line x1="${fx(cx)}" y1="${fy(cy)}" x2="${fx(cx + dx)}" y2="${fy(cy + dy)}" ` +
    `stroke="${stroke}" stroke-width="0.6"/>`
  );
}
