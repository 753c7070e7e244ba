/** Application bootstrap: wires the editor core, canvas, metrics panel,
 * keyboard shortcuts and the status bar together. */

import { ApiClient } from "./api.js";
import { EditorCore, EditorMode } from "./editor.js";
import { MetricsPanel } from "./metrics.js";
import { CanvasView } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const status = el<HTMLElement>("status");
  const banner = el<HTMLElement>("banner");

  const setBanner = (text: string, kind: "error" | "info" | "none") => {
    banner.textContent = text;
    banner.className = kind === "none" ? "hidden" : `banner ${kind}`;
  };

  const canvas = el<HTMLCanvasElement>("canvas");
  const metricsPanel = new MetricsPanel(api, el("metrics"), el("widths"));

  const core = new EditorCore(api, {
    onDocChange: () => {
      view.render();
      void metricsPanel.refresh();
    },
    onError: (message, violations) => {
      const detail = violations.map((v) => `${v.code}(${v.shapeId ?? "-"})`).join(", ");
      setBanner(detail ? `${message}: ${detail}` : message, "error");
      window.setTimeout(() => setBanner("", "none"), 5000);
    },
    onReadOnly: (ro) => {
      if (ro) setBanner("read-only: another editor holds the session", "info");
    },
    onDirtyChange: (dirty) => {
      status.classList.toggle("dirty", dirty);
      status.textContent = dirty ? "offline — changes queued" : modeLabel(core.mode);
    },
    onModeChange: (mode) => {
      status.textContent = modeLabel(mode);
      for (const b of document.querySelectorAll("[data-mode]")) {
        b.classList.toggle("active", b.getAttribute("data-mode") === mode);
      }
    },
    onMeasured: async (angle) => {
      const series = await api.measure(angle);
      metricsPanel.showWidths(series);
      const links = metricsPanel.exportLinks(angle);
      el<HTMLAnchorElement>("export-pos").href = links.pos;
      el<HTMLAnchorElement>("export-report").href = links.report;
    },
  });
  const view = new CanvasView(canvas, core);

  function modeLabel(mode: EditorMode): string {
    return {
      view: "view",
      edit: "edit (drag nodes, Alt+click inserts)",
      draw_closed: "drawing closed ring — Enter to finish",
      draw_open: "drawing open ring — Enter to finish",
      measure: "measure: click a direction",
    }[mode];
  }

  try {
    await api.acquireSession(true);
  } catch {
    setBanner("could not acquire the editing session; read-only", "info");
  }
  await core.load();
  await view.loadImage(api.imageUrl());
  await metricsPanel.refresh();
  el<HTMLAnchorElement>("export-csv").href = api.exportUrl("csv");
  el<HTMLAnchorElement>("export-pos").href = api.exportUrl("pos", 0);
  el<HTMLAnchorElement>("export-report").href = api.exportUrl("report", 0);

  for (const button of document.querySelectorAll("[data-mode]")) {
    button.addEventListener("click", () =>
      core.setMode(button.getAttribute("data-mode") as EditorMode)
    );
  }
  el("fit").addEventListener("click", () => view.fitToWindow());
  el("undo").addEventListener("click", () => void core.undo());
  el("redo").addEventListener("click", () => void core.redo());
  el("detect").addEventListener("click", async () => {
    setBanner("running detection…", "info");
    try {
      await core.load(); // refresh first so detect config defaults are current
      await api.detect({});
      await core.load();
      setBanner("", "none");
    } catch (e) {
      setBanner(`detection failed: ${e}`, "error");
    }
  });

  window.addEventListener("keydown", (e) => {
    if ((e.target as HTMLElement | null)?.tagName === "INPUT") return;
    void core
      .handleKey(e.key, { ctrl: e.ctrlKey || e.metaKey, shift: e.shiftKey })
      .then((handled) => {
        if (handled) e.preventDefault();
      });
  });

  window.addEventListener("online", () => void core.flushPending());
  window.setInterval(() => void core.flushPending(), 5000);

  status.textContent = modeLabel(core.mode);
}

void boot();
