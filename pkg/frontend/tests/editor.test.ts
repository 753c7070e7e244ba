import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EditorCore } from "../src/editor.js";
import {
  AnnotationFile,
  Shape,
  annualInsertIndex,
  deepEqual,
  nearestEdge,
  shoelaceArea,
} from "../src/model.js";
import { imageToScreen, screenToImage } from "../src/view.js";

function squareRing(id: string, half: number, cx = 100, cy = 100): Shape {
  return {
    id,
    label: "annual",
    kind: "annual",
    shapeType: "polygon",
    points: [
      [cx - half, cy - half],
      [cx + half, cy - half],
      [cx + half, cy + half],
      [cx - half, cy + half],
    ],
    yearLabel: null,
    nodeBudget: 360,
  };
}

function fixtureDoc(): AnnotationFile {
  return {
    version: 1,
    imagePath: "sample.png",
    imageWidth: 200,
    imageHeight: 200,
    scale: { pixelsPerMm: 10, source: "metadata" },
    pith: { x: 100, y: 100, method: "manual" },
    harvestYear: null,
    provenance: {},
    shapes: [squareRing("r0", 10), squareRing("r1", 20), squareRing("r2", 30)],
  };
}

type Scripted =
  | { kind: "ok" }
  | { kind: "error"; status: number; body: unknown }
  | { kind: "network" };

/** In-memory stand-in for the service: serves GET/PUT/undo/redo. */
class FakeServer {
  doc: AnnotationFile;
  undoStack: AnnotationFile[] = [];
  redoStack: AnnotationFile[] = [];
  putCount = 0;
  script: Scripted[] = [];

  constructor(doc: AnnotationFile) {
    this.doc = structuredClone(doc);
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (path === "/api/doc" && method === "GET") {
      return Response.json(this.doc);
    }
    if (path === "/api/doc" && method === "PUT") {
      const next = this.script.shift() ?? { kind: "ok" };
      if (next.kind === "network") throw new TypeError("fetch failed");
      if (next.kind === "error") {
        return Response.json(next.body as Record<string, unknown>, { status: next.status });
      }
      this.putCount += 1;
      this.undoStack.push(this.doc);
      this.redoStack = [];
      this.doc = JSON.parse(String(init?.body));
      return Response.json(this.doc);
    }
    if (path === "/api/undo" && method === "POST") {
      const prev = this.undoStack.pop();
      if (!prev) {
        return Response.json({ error: "history_empty", detail: "nothing to undo" }, { status: 400 });
      }
      this.redoStack.push(this.doc);
      this.doc = prev;
      return Response.json(this.doc);
    }
    if (path === "/api/redo" && method === "POST") {
      const next = this.redoStack.pop();
      if (!next) {
        return Response.json({ error: "history_empty", detail: "nothing to redo" }, { status: 400 });
      }
      this.undoStack.push(this.doc);
      this.doc = next;
      return Response.json(this.doc);
    }
    if (path === "/api/session" && method === "POST") {
      return Response.json({ token: "t" });
    }
    return Response.json({ error: "not_found", detail: path }, { status: 404 });
  };
}

interface Ctx {
  server: FakeServer;
  core: EditorCore;
  errors: { message: string; codes: string[] }[];
  readOnly: boolean[];
}

async function makeEditor(): Promise<Ctx> {
  const server = new FakeServer(fixtureDoc());
  const errors: Ctx["errors"] = [];
  const readOnly: boolean[] = [];
  const api = new ApiClient("http://fake", server.fetch);
  const core = new EditorCore(api, {
    onError: (message, violations) =>
      errors.push({ message, codes: violations.map((v) => v.code) }),
    onReadOnly: (ro) => readOnly.push(ro),
  });
  await core.load();
  return { server, core, errors, readOnly };
}

describe("selection and delete", () => {
  let ctx: Ctx;
  beforeEach(async () => {
    ctx = await makeEditor();
  });

  it("clicking a boundary selects the nearest shape", () => {
    ctx.core.pointerDown(121, 100); // 1 px from r1's right edge
    expect(ctx.core.selection?.shapeId).toBe("r1");
  });

  it("clicking empty space clears the selection", () => {
    ctx.core.pointerDown(121, 100);
    ctx.core.pointerDown(150, 160); // nowhere near a boundary
    expect(ctx.core.selection).toBeNull();
  });

  it("delete issues exactly one PUT and removes the ring", async () => {
    ctx.core.pointerDown(121, 100);
    await ctx.core.deleteSelected();
    expect(ctx.server.putCount).toBe(1);
    expect(ctx.server.doc.shapes.map((s) => s.id)).toEqual(["r0", "r2"]);
    expect(ctx.core.doc!.shapes.length).toBe(2);
  });
});

describe("node drag", () => {
  it("one PUT per drag gesture, final position committed", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("edit");
    ctx.core.pointerDown(130, 130); // r2's bottom-right corner node
    expect(ctx.core.selection).toEqual({ shapeId: "r2", nodeIndex: 2 });
    ctx.core.pointerMove(133, 131);
    ctx.core.pointerMove(136, 133);
    await ctx.core.pointerUp();
    expect(ctx.server.putCount).toBe(1);
    expect(ctx.server.doc.shapes[2].points[2]).toEqual([136, 133]);
  });

  it("a click without movement does not PUT", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("edit");
    ctx.core.pointerDown(130, 130);
    await ctx.core.pointerUp();
    expect(ctx.server.putCount).toBe(0);
  });

  it("grab radius is 6 screen px regardless of zoom", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("edit");
    ctx.core.setViewport({ zoom: 2 });
    ctx.core.pointerDown(134, 130); // 4 image px = 8 screen px away: miss
    expect(ctx.core.selection?.nodeIndex ?? null).toBeNull();
    ctx.core.setViewport({ zoom: 0.5 });
    ctx.core.pointerDown(134, 130); // 4 image px = 2 screen px away: hit
    expect(ctx.core.selection).toEqual({ shapeId: "r2", nodeIndex: 2 });
  });
});

describe("node insert and remove", () => {
  it("alt-click inserts a node on the nearest edge with one PUT", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("edit");
    ctx.core.pointerDown(120, 105, { alt: true }); // right edge of r1
    await new Promise((r) => setTimeout(r, 0));
    expect(ctx.server.putCount).toBe(1);
    const r1 = ctx.server.doc.shapes.find((s) => s.id === "r1")!;
    expect(r1.points.length).toBe(5);
    expect(r1.points[2]).toEqual([120, 105]); // after segment 1 -> index 2
  });

  it("backspace removes the selected node with one PUT", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("edit");
    ctx.core.pointerDown(120, 105, { alt: true });
    await new Promise((r) => setTimeout(r, 0));
    await ctx.core.removeSelectedNode();
    expect(ctx.server.putCount).toBe(2);
    const r1 = ctx.server.doc.shapes.find((s) => s.id === "r1")!;
    expect(r1.points.length).toBe(4);
  });

  it("refuses to shrink a polygon below 3 points", async () => {
    const ctx = await makeEditor();
    ctx.server.doc.shapes = [
      {
        ...squareRing("tri", 10),
        points: [
          [90, 90],
          [110, 90],
          [100, 115],
        ],
      },
    ];
    await ctx.core.load();
    ctx.core.setMode("edit");
    ctx.core.pointerDown(90, 90);
    expect(ctx.core.selection?.nodeIndex).toBe(0);
    await ctx.core.removeSelectedNode();
    expect(ctx.server.putCount).toBe(0);
    expect(ctx.errors.length).toBe(1);
  });
});

describe("drawing", () => {
  it("finish emits one PUT and inserts annual rings area-sorted", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("draw_closed");
    ctx.core.pointerDown(85, 85);
    ctx.core.pointerDown(115, 85);
    ctx.core.pointerDown(115, 115);
    ctx.core.pointerDown(85, 115);
    await ctx.core.finishDraw();
    expect(ctx.server.putCount).toBe(1);
    const ids = ctx.server.doc.shapes.map((s) => s.id);
    // 30x30 square (area 900) sits between half=10 (400) and half=20 (1600)
    expect(ids).toEqual(["r0", "drawn_001", "r1", "r2"]);
    expect(ctx.core.mode).toBe("view");
  });

  it("escape cancels without a PUT", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("draw_closed");
    ctx.core.pointerDown(85, 85);
    await ctx.core.handleKey("Escape");
    expect(ctx.core.draft.length).toBe(0);
    expect(ctx.server.putCount).toBe(0);
  });

  it("too few points is an inline error, not a PUT", async () => {
    const ctx = await makeEditor();
    ctx.core.setMode("draw_closed");
    ctx.core.pointerDown(85, 85);
    ctx.core.pointerDown(115, 85);
    await ctx.core.finishDraw();
    expect(ctx.server.putCount).toBe(0);
    expect(ctx.errors.length).toBe(1);
  });
});

describe("server rejection and conflicts", () => {
  it("422 reverts the canvas to the server document", async () => {
    const ctx = await makeEditor();
    const before = structuredClone(ctx.core.doc);
    ctx.server.script.push({
      kind: "error",
      status: 422,
      body: {
        error: "invariant_violations",
        detail: "document violates invariants",
        violations: [{ code: "crossing_boundaries", shapeId: "r0", message: "crosses r1" }],
      },
    });
    ctx.core.setMode("edit");
    ctx.core.pointerDown(130, 130);
    ctx.core.pointerMove(160, 160);
    await ctx.core.pointerUp();
    expect(deepEqual(ctx.core.doc, before)).toBe(true);
    expect(ctx.errors[0].codes).toContain("crossing_boundaries");
    expect(ctx.server.putCount).toBe(0);
  });

  it("409 flips to read-only and blocks further gestures", async () => {
    const ctx = await makeEditor();
    ctx.server.script.push({
      kind: "error",
      status: 409,
      body: { error: "session_conflict", detail: "another editor holds the session" },
    });
    ctx.core.pointerDown(121, 100);
    await ctx.core.deleteSelected();
    expect(ctx.readOnly).toEqual([true]);
    expect(ctx.core.readOnly).toBe(true);
    ctx.core.pointerDown(111, 100); // ignored in read-only mode
    expect(ctx.core.selection).toBeNull();
  });

  it("network loss queues the edit and flushes on reconnect", async () => {
    const ctx = await makeEditor();
    ctx.server.script.push({ kind: "network" });
    ctx.core.pointerDown(121, 100);
    await ctx.core.deleteSelected();
    expect(ctx.core.dirty).toBe(true);
    expect(ctx.server.putCount).toBe(0);
    // optimistic document kept locally
    expect(ctx.core.doc!.shapes.length).toBe(2);
    await ctx.core.flushPending();
    expect(ctx.core.dirty).toBe(false);
    expect(ctx.server.putCount).toBe(1);
    expect(ctx.server.doc.shapes.length).toBe(2);
  });
});

describe("keyboard shortcuts", () => {
  it("maps the documented subset", async () => {
    const ctx = await makeEditor();
    expect(await ctx.core.handleKey("n", { ctrl: true })).toBe(true);
    expect(ctx.core.mode).toBe("draw_closed");
    expect(await ctx.core.handleKey("n", { ctrl: true, shift: true })).toBe(true);
    expect(ctx.core.mode).toBe("draw_open");
    expect(await ctx.core.handleKey("j", { ctrl: true })).toBe(true);
    expect(ctx.core.mode).toBe("edit");
    expect(await ctx.core.handleKey("x")).toBe(false);
  });

  it("ctrl+z undoes through the server", async () => {
    const ctx = await makeEditor();
    ctx.core.pointerDown(121, 100);
    await ctx.core.deleteSelected();
    expect(ctx.server.doc.shapes.length).toBe(2);
    await ctx.core.handleKey("z", { ctrl: true });
    expect(ctx.server.doc.shapes.length).toBe(3);
    expect(ctx.core.doc!.shapes.length).toBe(3);
  });
});

describe("pure helpers", () => {
  it("shoelace area of the 20x20 square", () => {
    expect(shoelaceArea(squareRing("x", 10).points)).toBe(400);
  });

  it("annual insert index keeps area order", () => {
    const shapes = fixtureDoc().shapes;
    expect(annualInsertIndex(shapes, 900)).toBe(1);
    expect(annualInsertIndex(shapes, 50)).toBe(0);
    expect(annualInsertIndex(shapes, 1e9)).toBe(3);
  });

  it("nearest edge picks the right segment", () => {
    const hit = nearestEdge(squareRing("x", 10), 111, 100);
    expect(hit.segment).toBe(1); // right edge
    expect(hit.distance).toBeCloseTo(1);
  });

  it("screen/image transforms are inverse", () => {
    const vp = { panX: 40, panY: -12, zoom: 2.5 };
    const [ix, iy] = screenToImage(200, 100, vp);
    const [sx, sy] = imageToScreen(ix, iy, vp);
    expect(sx).toBeCloseTo(200);
    expect(sy).toBeCloseTo(100);
  });
});
