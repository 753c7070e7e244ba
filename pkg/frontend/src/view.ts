/**
 * Canvas renderer and DOM event bridge.
 *
 * The view owns the screen transform (pan/zoom live in the editor's
 * viewport) and hands image-space coordinates to the editor core. Shape
 * coordinates stay at full image resolution; only the drawing is scaled.
 */

import { EditorCore } from "./editor.js";
import { AnnotationFile, Shape } from "./model.js";

// Okabe-Ito colorblind-safe cycle (same order as the server reports).
export const PALETTE = [
  "#e69f00",
  "#56b4e9",
  "#009e73",
  "#f0e442",
  "#0072b2",
  "#d55e00",
  "#cc79a7",
  "#000000",
];

export function ringColor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

export function screenToImage(
  sx: number,
  sy: number,
  viewport: { panX: number; panY: number; zoom: number }
): [number, number] {
  return [(sx - viewport.panX) / viewport.zoom, (sy - viewport.panY) / viewport.zoom];
}

export function imageToScreen(
  ix: number,
  iy: number,
  viewport: { panX: number; panY: number; zoom: number }
): [number, number] {
  return [ix * viewport.zoom + viewport.panX, iy * viewport.zoom + viewport.panY];
}

export class CanvasView {
  private ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private panning: { startX: number; startY: number; panX: number; panY: number } | null = null;

  constructor(private canvas: HTMLCanvasElement, private core: EditorCore) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.bind();
  }

  async loadImage(url: string): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      const img = new Image();
      img.onload = () => {
        this.image = img;
        resolve();
      };
      img.onerror = () => reject(new Error("image load failed"));
      img.src = url;
    });
    this.fitToWindow();
    this.render();
  }

  fitToWindow(): void {
    const doc = this.core.doc;
    if (!doc) return;
    const zx = this.canvas.width / doc.imageWidth;
    const zy = this.canvas.height / doc.imageHeight;
    const zoom = Math.min(zx, zy) * 0.95;
    this.core.setViewport({
      zoom,
      panX: (this.canvas.width - doc.imageWidth * zoom) / 2,
      panY: (this.canvas.height - doc.imageHeight * zoom) / 2,
    });
    this.render();
  }

  private bind(): void {
    this.canvas.addEventListener("pointerdown", (e) => {
      if (e.button === 1 || (e.button === 0 && e.ctrlKey && this.core.mode === "view")) {
        this.panning = {
          startX: e.offsetX,
          startY: e.offsetY,
          panX: this.core.viewport.panX,
          panY: this.core.viewport.panY,
        };
        return;
      }
      const [x, y] = screenToImage(e.offsetX, e.offsetY, this.core.viewport);
      this.core.pointerDown(x, y, { alt: e.altKey });
      this.render();
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (this.panning) {
        this.core.setViewport({
          panX: this.panning.panX + (e.offsetX - this.panning.startX),
          panY: this.panning.panY + (e.offsetY - this.panning.startY),
        });
        this.render();
        return;
      }
      const [x, y] = screenToImage(e.offsetX, e.offsetY, this.core.viewport);
      this.core.pointerMove(x, y);
      this.render();
    });
    this.canvas.addEventListener("pointerup", () => {
      this.panning = null;
      void this.core.pointerUp().then(() => this.render());
    });
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const factor = Math.exp(-e.deltaY / 400);
      const { zoom, panX, panY } = this.core.viewport;
      const next = zoom * factor;
      this.core.setViewport({
        zoom: next,
        // keep the cursor anchored while zooming
        panX: e.offsetX - ((e.offsetX - panX) / zoom) * this.core.viewport.zoom * factor,
        panY: e.offsetY - ((e.offsetY - panY) / zoom) * this.core.viewport.zoom * factor,
      });
      this.render();
    });
  }

  render(): void {
    const doc = this.core.doc;
    const { ctx, canvas } = this;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!doc) return;
    const { panX, panY, zoom } = this.core.viewport;
    ctx.setTransform(zoom, 0, 0, zoom, panX, panY);
    if (this.image) ctx.drawImage(this.image, 0, 0, doc.imageWidth, doc.imageHeight);

    let ringIndex = 0;
    for (const shape of doc.shapes) {
      const isRing = shape.kind === "annual";
      const color = isRing ? ringColor(ringIndex) : shape.kind === "defect" ? "#d62728" : "#7f7f7f";
      if (isRing) ringIndex += 1;
      this.drawShape(shape, color);
    }
    this.drawDraft();
    this.drawPith();
  }

  private drawShape(shape: Shape, color: string): void {
    const { ctx } = this;
    const selected = this.core.selection?.shapeId === shape.id;
    const zoom = this.core.viewport.zoom;
    ctx.strokeStyle = color;
    ctx.lineWidth = (selected ? 3.5 : 2) / zoom;
    ctx.beginPath();
    shape.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    if (shape.shapeType === "polygon") ctx.closePath();
    ctx.stroke();

    if (selected && this.core.mode === "edit") {
      const r = 3.5 / zoom;
      ctx.fillStyle = color;
      for (const [x, y] of shape.points) {
        ctx.beginPath();
        ctx.arc(x, y, r, 0, 2 * Math.PI);
        ctx.fill();
      }
      const ni = this.core.selection?.nodeIndex;
      if (ni !== null && ni !== undefined && shape.points[ni]) {
        ctx.fillStyle = "#ffffff";
        ctx.strokeStyle = color;
        ctx.beginPath();
        ctx.arc(shape.points[ni][0], shape.points[ni][1], r * 1.4, 0, 2 * Math.PI);
        ctx.fill();
        ctx.stroke();
      }
    }
  }

  private drawDraft(): void {
    const draft = this.core.draft;
    if (draft.length === 0) return;
    const { ctx } = this;
    const zoom = this.core.viewport.zoom;
    ctx.strokeStyle = "#ff00ff";
    ctx.setLineDash([6 / zoom, 4 / zoom]);
    ctx.lineWidth = 2 / zoom;
    ctx.beginPath();
    draft.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#ff00ff";
    for (const [x, y] of draft) {
      ctx.beginPath();
      ctx.arc(x, y, 3 / zoom, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawPith(): void {
    const pith = this.core.doc?.pith;
    if (!pith) return;
    const { ctx } = this;
    const r = 5 / this.core.viewport.zoom;
    ctx.fillStyle = "#ff0000";
    ctx.beginPath();
    ctx.arc(pith.x, pith.y, r, 0, 2 * Math.PI);
    ctx.fill();
  }
}
