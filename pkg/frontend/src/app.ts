// Single-page wiring: launch jobs, browse surfaces and revisions, submit
// free-form or structured edits. Every state change round-trips through the
// service; the view renders only what the server returned.

import {
  ApiError,
  createJob,
  getMetrics,
  getScene,
  submitInstruction,
  submitOps,
} from "./api.js";
import { diffScenes, describeDiff, emptyDiff, type SceneDiff } from "./diff.js";
import { renderSurfaceSvg } from "./render.js";
import type { EditOp, Scene, SceneResponse } from "./types.js";

type ViewState = {
  baseUrl: string;
  sceneId: string | null;
  revisions: Scene[];
  shownRevision: number;
  surface: number;
  selected: string | null;
};

const state: ViewState = {
  baseUrl: "",
  sceneId: null,
  revisions: [],
  shownRevision: 0,
  surface: 0,
  selected: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string) {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.style.display = message ? "block" : "none";
}

function currentScene(): Scene | null {
  return state.revisions[state.shownRevision] ?? null;
}

function currentDiff(): SceneDiff {
  if (state.shownRevision === 0) return emptyDiff();
  return diffScenes(
    state.revisions[state.shownRevision - 1],
    state.revisions[state.shownRevision],
  );
}

async function loadAllRevisions(sceneId: string): Promise<void> {
  const latest = await getScene(state.baseUrl, sceneId);
  const revisions: Scene[] = [];
  for (let rev = 0; rev < latest.revisions; rev++) {
    const resp = await getScene(state.baseUrl, sceneId, rev);
    revisions.push(resp.scene);
  }
  state.sceneId = sceneId;
  state.revisions = revisions;
  state.shownRevision = revisions.length - 1;
}

function renderAll() {
  const scene = currentScene();
  const canvas = el<HTMLDivElement>("canvas");
  const tabs = el<HTMLDivElement>("surface-tabs");
  const revList = el<HTMLUListElement>("revision-list");
  const details = el<HTMLDivElement>("asset-details");
  const diffLine = el<HTMLDivElement>("diff-line");
  tabs.innerHTML = "";
  revList.innerHTML = "";
  if (!scene) {
    canvas.innerHTML = "<p>No scene loaded.</p>";
    details.textContent = "";
    diffLine.textContent = "";
    return;
  }

  for (const s of scene.furniture.surfaces) {
    const btn = document.createElement("button");
    btn.textContent = `surface ${s.index} (${s.height_cm} cm)`;
    btn.className = s.index === state.surface ? "tab active" : "tab";
    btn.addEventListener("click", () => {
      state.surface = s.index;
      renderAll();
    });
    tabs.appendChild(btn);
  }

  state.revisions.forEach((_, rev) => {
    const item = document.createElement("li");
    const btn = document.createElement("button");
    btn.textContent = rev === 0 ? "revision 0 (initial)" : `revision ${rev}`;
    btn.className = rev === state.shownRevision ? "rev active" : "rev";
    btn.addEventListener("click", () => {
      state.shownRevision = rev;
      state.selected = null;
      renderAll();
    });
    item.appendChild(btn);
    revList.appendChild(item);
  });

  const diff = currentDiff();
  diffLine.textContent = state.shownRevision === 0 ? "" : describeDiff(diff);

  try {
    canvas.innerHTML = renderSurfaceSvg(scene, state.surface, {
      selected: state.selected,
      diff,
    });
  } catch (err) {
    canvas.innerHTML = `<p class="placeholder">render failed: ${String(err)}</p>`;
    return;
  }
  for (const group of canvas.querySelectorAll<SVGGElement>("[data-asset]")) {
    group.addEventListener("click", () => {
      state.selected = group.getAttribute("data-asset");
      renderAll();
    });
  }

  if (state.selected) {
    const asset = scene.assets.find((a) => a.id === state.selected);
    if (asset) {
      const placement = scene.layout[asset.id];
      const directives = scene.directives
        .filter((d) => d.subject === asset.id || d.reference === asset.id)
        .map(
          (d) =>
            `${d.subject} ${d.kind}${d.relation ? ` ${d.relation}` : ""}` +
            `${d.region ? ` ${d.region}` : ""}${d.direction ? ` ${d.direction}` : ""}` +
            `${d.reference ? ` → ${d.reference}` : ""}`,
        );
      details.innerHTML =
        `<h3>${asset.name}</h3>` +
        `<p>${asset.style || "unstyled"} / ${asset.material || "-"}<br>` +
        `${asset.width_cm} × ${asset.depth_cm} × ${asset.height_cm} cm<br>` +
        `at (${placement.x_cm}, ${placement.y_cm}), yaw ` +
        `${(placement.orientation.r90 ? 90 : 0) + (placement.orientation.r180 ? 180 : 0)}°` +
        `${placement.stack_base ? `, on top of ${placement.stack_base}` : ""}</p>` +
        `<p>${directives.length ? directives.join("<br>") : "no directives"}</p>`;
    }
  } else {
    details.textContent = "Click an asset to inspect it.";
  }
}

async function refreshAfterEdit(resp: SceneResponse) {
  if (!state.sceneId) return;
  await loadAllRevisions(state.sceneId);
  state.shownRevision = resp.revision;
  renderAll();
}

function wireLaunchForm() {
  el<HTMLButtonElement>("launch").addEventListener("click", async () => {
    showError("");
    state.baseUrl = el<HTMLInputElement>("base-url").value.trim();
    const meshText = el<HTMLTextAreaElement>("mesh-obj").value.trim();
    const meshPath = el<HTMLInputElement>("mesh-path").value.trim();
    try {
      const job = await createJob(state.baseUrl, {
        prompt: el<HTMLInputElement>("prompt").value,
        n_assets: Number(el<HTMLInputElement>("n-assets").value),
        seed: Number(el<HTMLInputElement>("seed").value || "0"),
        ...(meshText ? { mesh_obj: meshText } : { mesh_path: meshPath }),
      });
      await loadAllRevisions(job.scene_id);
      state.surface = 0;
      state.selected = null;
      renderAll();
      const metrics = await getMetrics(state.baseUrl, job.scene_id);
      el<HTMLDivElement>("metrics").textContent =
        `OOB ${metrics.oob_rate} · BBL ${metrics.bbl_m3} m³`;
    } catch (err) {
      showError(err instanceof ApiError ? err.message : String(err));
    }
  });
}

function wireEditForms() {
  el<HTMLButtonElement>("send-instruction").addEventListener("click", async () => {
    if (!state.sceneId) return;
    showError("");
    try {
      const resp = await submitInstruction(
        state.baseUrl,
        state.sceneId,
        el<HTMLInputElement>("instruction").value,
      );
      await refreshAfterEdit(resp);
    } catch (err) {
      showError(err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>("send-op").addEventListener("click", async () => {
    if (!state.sceneId) return;
    showError("");
    const kind = el<HTMLSelectElement>("op-kind").value as EditOp["kind"];
    const target = state.selected ?? undefined;
    const value = el<HTMLInputElement>("op-value").value.trim();
    let op: EditOp;
    try {
      if (kind === "remove") {
        op = { kind, target };
      } else if (kind === "rotate") {
        op = { kind, target, direction: value || "left" };
      } else if (kind === "resize") {
        const [w, d, h] = value.split(/[x,\s]+/).map(Number);
        op = { kind, target, dims: { width_cm: w, depth_cm: d, height_cm: h } };
      } else if (kind === "insert") {
        op = { kind, asset: JSON.parse(value) };
      } else if (kind === "replace") {
        op = { kind, target, asset: JSON.parse(value) };
      } else {
        op = { kind, target, directives: JSON.parse(value) };
      }
      const resp = await submitOps(state.baseUrl, state.sceneId, [op]);
      await refreshAfterEdit(resp);
    } catch (err) {
      showError(err instanceof ApiError ? err.message : String(err));
    }
  });
}

export function start() {
  wireLaunchForm();
  wireEditForms();
  renderAll();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
