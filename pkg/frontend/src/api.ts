/**
 * HTTP client for the ringkit service.
 *
 * All document mutations go through `putDoc`; when the network is down the
 * latest document is queued and flushed on reconnect (a full-document PUT
 * supersedes any queued one, so only the newest text is kept).
 */

import { AnnotationFile, MetricsRow, RaySeriesWire, Violation } from "./model.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public violations: Violation[] = []
  ) {
    super(message);
  }
}

export class NetworkDown extends Error {}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;
  private pendingDoc: string | null = null;
  onDirtyChange: (dirty: boolean) => void = () => {};

  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (u, i) => fetch(u, i)
  ) {}

  get dirty(): boolean {
    return this.pendingDoc !== null;
  }

  private headers(json = true): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["X-Session-Token"] = this.token;
    return h;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (e) {
      throw new NetworkDown(String(e));
    }
    if (!resp.ok) {
      let code = "http_error";
      let detail = `${resp.status}`;
      let violations: Violation[] = [];
      try {
        const body = await resp.json();
        code = body.error ?? code;
        detail = body.detail ?? detail;
        violations = body.violations ?? [];
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, code, detail, violations);
    }
    return resp;
  }

  async acquireSession(takeover = false): Promise<void> {
    const resp = await this.request("/api/session", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ takeover }),
    });
    this.token = (await resp.json()).token;
  }

  async releaseSession(): Promise<void> {
    await this.request("/api/session", { method: "DELETE", headers: this.headers(false) });
    this.token = null;
  }

  async getDoc(): Promise<AnnotationFile> {
    const resp = await this.request("/api/doc");
    return (await resp.json()) as AnnotationFile;
  }

  /**
   * Replace the document. Network failures queue the text for
   * `flushPending` and resolve to "queued".
   */
  async putDoc(doc: AnnotationFile): Promise<AnnotationFile | "queued"> {
    const text = JSON.stringify(doc);
    try {
      const resp = await this.request("/api/doc", {
        method: "PUT",
        headers: this.headers(),
        body: text,
      });
      this.setPending(null);
      return (await resp.json()) as AnnotationFile;
    } catch (e) {
      if (e instanceof NetworkDown) {
        this.setPending(text);
        return "queued";
      }
      throw e;
    }
  }

  async flushPending(): Promise<AnnotationFile | null> {
    if (this.pendingDoc === null) return null;
    const resp = await this.request("/api/doc", {
      method: "PUT",
      headers: this.headers(),
      body: this.pendingDoc,
    });
    this.setPending(null);
    return (await resp.json()) as AnnotationFile;
  }

  private setPending(text: string | null): void {
    const was = this.dirty;
    this.pendingDoc = text;
    if (was !== this.dirty) this.onDirtyChange(this.dirty);
  }

  async undo(): Promise<AnnotationFile> {
    const resp = await this.request("/api/undo", { method: "POST", headers: this.headers(false) });
    return (await resp.json()) as AnnotationFile;
  }

  async redo(): Promise<AnnotationFile> {
    const resp = await this.request("/api/redo", { method: "POST", headers: this.headers(false) });
    return (await resp.json()) as AnnotationFile;
  }

  async metrics(): Promise<MetricsRow[]> {
    const resp = await this.request("/api/metrics", {
      method: "POST",
      headers: this.headers(false),
    });
    return (await resp.json()) as MetricsRow[];
  }

  async measure(angleDeg: number, origin?: [number, number]): Promise<RaySeriesWire> {
    const body: Record<string, unknown> = { angleDeg };
    if (origin) body.origin = origin;
    const resp = await this.request("/api/measure", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
    return (await resp.json()) as RaySeriesWire;
  }

  async detect(config: Record<string, unknown> = {}): Promise<AnnotationFile> {
    const resp = await this.request("/api/detect", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(config),
    });
    return (await resp.json()) as AnnotationFile;
  }

  imageUrl(): string {
    return this.baseUrl + "/api/image";
  }

  exportUrl(format: "csv" | "pos" | "report", angle?: number): string {
    const q = angle !== undefined ? `?angle=${angle}` : "";
    return `${this.baseUrl}/api/export/${format}${q}`;
  }
}
