/**
 * Headless editor core: selection, modes, gestures, and the commit
 * protocol. Every completed gesture (delete ring, finish a node drag,
 * insert/remove node, finish a drawn polyline) produces exactly one
 * document PUT; undo/redo are forwarded to the server so its history
 * stays authoritative. Rejected edits (422) revert the local document to
 * the last server-confirmed snapshot.
 *
 * All coordinates entering the core are image-space; the canvas view owns
 * the screen transform and divides its 6 px hit radius by the zoom.
 */

import { ApiClient, ApiError, NetworkDown } from "./api.js";
import {
  AnnotationFile,
  Shape,
  ShapeKind,
  Violation,
  annualInsertIndex,
  cloneDoc,
  nearestEdge,
  nearestNode,
  shoelaceArea,
} from "./model.js";

export type EditorMode = "view" | "edit" | "draw_closed" | "draw_open" | "measure";

export interface Selection {
  shapeId: string;
  nodeIndex: number | null;
}

export interface Viewport {
  panX: number;
  panY: number;
  zoom: number;
}

export const MIN_ZOOM = 0.05;
export const MAX_ZOOM = 40;
export const HIT_RADIUS_SCREEN_PX = 6;

export interface EditorEvents {
  onDocChange?: (doc: AnnotationFile) => void;
  onSelectionChange?: (sel: Selection | null) => void;
  onModeChange?: (mode: EditorMode) => void;
  onError?: (message: string, violations: Violation[]) => void;
  onReadOnly?: (readOnly: boolean) => void;
  onDirtyChange?: (dirty: boolean) => void;
  onDraftChange?: (points: [number, number][]) => void;
  onMeasured?: (angleDeg: number) => void;
}

interface DragState {
  shapeId: string;
  nodeIndex: number;
  before: AnnotationFile;
  moved: boolean;
}

export class EditorCore {
  doc: AnnotationFile | null = null;
  private serverDoc: AnnotationFile | null = null;
  selection: Selection | null = null;
  mode: EditorMode = "view";
  viewport: Viewport = { panX: 0, panY: 0, zoom: 1 };
  readOnly = false;
  draft: [number, number][] = [];
  private drag: DragState | null = null;
  private drawCounter = 0;

  constructor(private api: ApiClient, private events: EditorEvents = {}) {
    api.onDirtyChange = (d) => this.events.onDirtyChange?.(d);
  }

  get dirty(): boolean {
    return this.api.dirty;
  }

  async load(): Promise<void> {
    const doc = await this.api.getDoc();
    this.serverDoc = doc;
    this.doc = cloneDoc(doc);
    this.events.onDocChange?.(this.doc);
  }

  setMode(mode: EditorMode): void {
    if (mode === this.mode) return;
    this.mode = mode;
    this.draft = [];
    this.events.onDraftChange?.(this.draft);
    this.events.onModeChange?.(mode);
  }

  setViewport(v: Partial<Viewport>): void {
    const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, v.zoom ?? this.viewport.zoom));
    this.viewport = {
      panX: v.panX ?? this.viewport.panX,
      panY: v.panY ?? this.viewport.panY,
      zoom,
    };
  }

  /** Image-space hit radius for the fixed 6 px screen-space grab zone. */
  hitRadius(): number {
    return HIT_RADIUS_SCREEN_PX / this.viewport.zoom;
  }

  private select(sel: Selection | null): void {
    this.selection = sel;
    this.events.onSelectionChange?.(sel);
  }

  private shapeById(id: string): Shape | undefined {
    return this.doc?.shapes.find((s) => s.id === id);
  }

  /** Find the shape whose boundary passes nearest to (x, y). */
  private hitShape(x: number, y: number): { shape: Shape; distance: number } | null {
    if (!this.doc) return null;
    let best: { shape: Shape; distance: number } | null = null;
    for (const s of this.doc.shapes) {
      if (s.points.length < 2) continue;
      const hit = nearestEdge(s, x, y);
      if (!best || hit.distance < best.distance) best = { shape: s, distance: hit.distance };
    }
    return best && best.distance <= this.hitRadius() ? best : null;
  }

  pointerDown(x: number, y: number, opts: { alt?: boolean } = {}): void {
    if (this.readOnly || !this.doc) return;
    if (this.mode === "draw_closed" || this.mode === "draw_open") {
      this.draft.push([x, y]);
      this.events.onDraftChange?.(this.draft);
      return;
    }
    if (this.mode === "measure") {
      void this.measureToward(x, y);
      return;
    }
    if (this.mode === "edit") {
      if (opts.alt) {
        void this.insertNodeAt(x, y);
        return;
      }
      const grabbed = this.grabNode(x, y);
      if (grabbed) return;
    }
    const hit = this.hitShape(x, y);
    this.select(hit ? { shapeId: hit.shape.id, nodeIndex: null } : null);
  }

  private grabNode(x: number, y: number): boolean {
    if (!this.doc) return false;
    // prefer the selected shape's nodes, else any shape's
    const candidates = this.selection
      ? [this.shapeById(this.selection.shapeId), ...this.doc.shapes]
      : [...this.doc.shapes];
    for (const s of candidates) {
      if (!s || s.points.length === 0) continue;
      const node = nearestNode(s, x, y);
      if (node.distance <= this.hitRadius()) {
        this.drag = {
          shapeId: s.id,
          nodeIndex: node.index,
          before: cloneDoc(this.doc),
          moved: false,
        };
        this.select({ shapeId: s.id, nodeIndex: node.index });
        return true;
      }
    }
    return false;
  }

  pointerMove(x: number, y: number): void {
    if (!this.drag || !this.doc) return;
    const shape = this.shapeById(this.drag.shapeId);
    if (!shape) return;
    shape.points[this.drag.nodeIndex] = [x, y];
    this.drag.moved = true;
    this.events.onDocChange?.(this.doc);
  }

  async pointerUp(): Promise<void> {
    if (!this.drag) return;
    const drag = this.drag;
    this.drag = null;
    if (!drag.moved || !this.doc) return;
    await this.commit(this.doc, drag.before);
  }

  private async insertNodeAt(x: number, y: number): Promise<void> {
    if (!this.doc) return;
    const hit = this.hitShape(x, y);
    if (!hit) return;
    const before = cloneDoc(this.doc);
    const shape = hit.shape;
    const edge = nearestEdge(shape, x, y);
    shape.points.splice(edge.segment + 1, 0, [x, y]);
    this.select({ shapeId: shape.id, nodeIndex: edge.segment + 1 });
    await this.commit(this.doc, before);
  }

  async removeSelectedNode(): Promise<void> {
    if (!this.doc || !this.selection || this.selection.nodeIndex === null) return;
    const shape = this.shapeById(this.selection.shapeId);
    if (!shape) return;
    const minPoints = shape.shapeType === "polygon" ? 3 : 2;
    if (shape.points.length <= minPoints) {
      this.events.onError?.(
        `cannot remove: a ${shape.shapeType} needs at least ${minPoints} points`,
        []
      );
      return;
    }
    const before = cloneDoc(this.doc);
    shape.points.splice(this.selection.nodeIndex, 1);
    this.select({ shapeId: shape.id, nodeIndex: null });
    await this.commit(this.doc, before);
  }

  async deleteSelected(): Promise<void> {
    if (!this.doc || !this.selection) return;
    const before = cloneDoc(this.doc);
    this.doc.shapes = this.doc.shapes.filter((s) => s.id !== this.selection!.shapeId);
    this.select(null);
    await this.commit(this.doc, before);
  }

  /** Finish the current draft polyline (Enter). */
  async finishDraw(kind: ShapeKind = "annual"): Promise<void> {
    if (!this.doc || this.draft.length === 0) return;
    const closed = this.mode === "draw_closed";
    const minPoints = closed ? 3 : 2;
    if (this.draft.length < minPoints) {
      this.events.onError?.(`need at least ${minPoints} points to finish`, []);
      return;
    }
    const before = cloneDoc(this.doc);
    this.drawCounter += 1;
    const shape: Shape = {
      id: `drawn_${String(this.drawCounter).padStart(3, "0")}`,
      label: kind,
      kind,
      shapeType: closed ? "polygon" : "linestrip",
      points: this.draft.map(([x, y]) => [x, y] as [number, number]),
      yearLabel: null,
      nodeBudget: 360,
    };
    // keep the area-sorted annual order the server validates
    if (kind === "annual" && closed) {
      const idx = annualInsertIndex(this.doc.shapes, shoelaceArea(shape.points));
      this.doc.shapes.splice(idx, 0, shape);
    } else {
      this.doc.shapes.push(shape);
    }
    this.draft = [];
    this.events.onDraftChange?.(this.draft);
    this.select({ shapeId: shape.id, nodeIndex: null });
    this.setMode("view");
    await this.commit(this.doc, before);
  }

  cancelDraw(): void {
    this.draft = [];
    this.events.onDraftChange?.(this.draft);
    this.setMode("view");
  }

  async undo(): Promise<void> {
    await this.historyStep(() => this.api.undo());
  }

  async redo(): Promise<void> {
    await this.historyStep(() => this.api.redo());
  }

  private async historyStep(step: () => Promise<AnnotationFile>): Promise<void> {
    try {
      const doc = await step();
      this.serverDoc = doc;
      this.doc = cloneDoc(doc);
      this.select(null);
      this.events.onDocChange?.(this.doc);
    } catch (e) {
      this.handleFailure(e);
    }
  }

  private async measureToward(x: number, y: number): Promise<void> {
    if (!this.doc) return;
    if (!this.doc.pith) {
      this.events.onError?.("no pith set: detect rings or set the pith first", []);
      return;
    }
    const dx = x - this.doc.pith.x;
    const dy = y - this.doc.pith.y;
    const angle = ((Math.atan2(-dy, dx) * 180) / Math.PI + 360) % 360;
    this.events.onMeasured?.(angle);
  }

  private async commit(mutated: AnnotationFile, before: AnnotationFile): Promise<void> {
    this.events.onDocChange?.(mutated);
    try {
      const result = await this.api.putDoc(mutated);
      if (result === "queued") {
        // offline: keep the optimistic document, the client flushes later
        return;
      }
      this.serverDoc = result;
      this.doc = cloneDoc(result);
      this.events.onDocChange?.(this.doc);
    } catch (e) {
      this.doc = cloneDoc(this.serverDoc ?? before);
      this.events.onDocChange?.(this.doc);
      this.handleFailure(e);
    }
  }

  async flushPending(): Promise<void> {
    try {
      const doc = await this.api.flushPending();
      if (doc) {
        this.serverDoc = doc;
        this.doc = cloneDoc(doc);
        this.events.onDocChange?.(this.doc);
      }
    } catch (e) {
      if (!(e instanceof NetworkDown)) this.handleFailure(e);
    }
  }

  private handleFailure(e: unknown): void {
    if (e instanceof ApiError && e.status === 409) {
      this.readOnly = true;
      this.events.onReadOnly?.(true);
      this.events.onError?.("another editor holds the session (read-only)", []);
      return;
    }
    if (e instanceof ApiError) {
      this.events.onError?.(e.message, e.violations);
      return;
    }
    if (e instanceof NetworkDown) {
      this.events.onError?.("network unavailable; changes queued", []);
      return;
    }
    throw e;
  }

  /** Keyboard dispatch for the supported shortcut subset. */
  async handleKey(key: string, opts: { ctrl?: boolean; shift?: boolean } = {}): Promise<boolean> {
    if (opts.ctrl && (key === "z" || key === "Z")) {
      await this.undo();
      return true;
    }
    if (opts.ctrl && opts.shift && (key === "n" || key === "N")) {
      this.setMode("draw_open");
      return true;
    }
    if (opts.ctrl && (key === "n" || key === "N")) {
      this.setMode("draw_closed");
      return true;
    }
    if (opts.ctrl && (key === "j" || key === "J")) {
      this.setMode(this.mode === "edit" ? "view" : "edit");
      return true;
    }
    if (key === "Delete") {
      await this.deleteSelected();
      return true;
    }
    if (key === "Backspace") {
      await this.removeSelectedNode();
      return true;
    }
    if (key === "Enter" && (this.mode === "draw_closed" || this.mode === "draw_open")) {
      await this.finishDraw();
      return true;
    }
    if (key === "Escape" && (this.mode === "draw_closed" || this.mode === "draw_open")) {
      this.cancelDraw();
      return true;
    }
    return false;
  }
}
