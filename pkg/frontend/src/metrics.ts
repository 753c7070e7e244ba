/**
 * Live metrics panel: table mirroring the CSV export, the ray measurement
 * readout, and export links. Every number shown is fetched from the
 * service; the UI computes nothing itself.
 */

import { ApiClient, ApiError } from "./api.js";
import { MetricsRow, RaySeriesWire } from "./model.js";

const COLUMNS: [string, (r: MetricsRow) => string][] = [
  ["Ring", (r) => String(r.ringIndex)],
  ["Area (mm2)", (r) => r.annulusArea.toFixed(2)],
  ["Cumulative area (mm2)", (r) => r.cumulativeArea.toFixed(2)],
  ["Perimeter (mm)", (r) => r.perimeter.toFixed(2)],
  ["Equivalent ring width (mm)", (r) => r.equivalentRingWidth.toFixed(2)],
  ["Similarity factor", (r) => r.similarityFactor.toFixed(4)],
  ["Eccentricity module (mm)", (r) => r.eccentricityModule.toFixed(2)],
  ["Eccentricity phase (deg)", (r) => r.eccentricityPhase.toFixed(2)],
  ["EW area (mm2)", (r) => (r.ewArea === null ? "" : r.ewArea.toFixed(2))],
  ["LW area (mm2)", (r) => (r.lwArea === null ? "" : r.lwArea.toFixed(2))],
  ["Excluded area (mm2)", (r) => r.excludedArea.toFixed(2)],
];

export class MetricsPanel {
  onPrompt: (message: string) => void = () => {};

  constructor(
    private api: ApiClient,
    private tableHost: HTMLElement,
    private widthsHost: HTMLElement
  ) {}

  async refresh(): Promise<void> {
    let rows: MetricsRow[];
    try {
      rows = await this.api.metrics();
    } catch (e) {
      if (e instanceof ApiError && e.code === "MissingScale") {
        this.tableHost.innerHTML =
          '<p class="prompt">No scale set — calibrate the pixel-to-millimeter ' +
          "ratio to see metrics.</p>";
        this.onPrompt("missing scale");
        return;
      }
      if (e instanceof ApiError && e.code === "MissingPith") {
        this.tableHost.innerHTML =
          '<p class="prompt">No pith set — run detection or set the pith manually.</p>';
        this.onPrompt("missing pith");
        return;
      }
      throw e;
    }
    this.renderTable(rows);
  }

  private renderTable(rows: MetricsRow[]): void {
    const head = COLUMNS.map(([name]) => `<th>${name}</th>`).join("");
    const body = rows
      .map(
        (r) => `<tr>${COLUMNS.map(([, fmt]) => `<td>${fmt(r)}</td>`).join("")}</tr>`
      )
      .join("");
    this.tableHost.innerHTML = `<table class="metrics"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
  }

  showWidths(series: RaySeriesWire): void {
    const items = series.widths
      .map((w) => `<li>ring ${w.ringIndex}: ${w.widthMm.toFixed(2)} mm</li>`)
      .join("");
    const skipped = series.skipped.length
      ? `<p class="skipped">skipped rings: ${series.skipped.join(", ")}</p>`
      : "";
    this.widthsHost.innerHTML =
      `<h3>Ray ${series.ray.angleDeg.toFixed(1)}&deg;</h3><ul>${items}</ul>${skipped}`;
  }

  exportLinks(angle: number): { csv: string; pos: string; report: string } {
    return {
      csv: this.api.exportUrl("csv"),
      pos: this.api.exportUrl("pos", angle),
      report: this.api.exportUrl("report", angle),
    };
  }
}
