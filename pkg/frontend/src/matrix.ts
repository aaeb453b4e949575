/**
 * Agreement matrix: one colored cell per paper.
 *
 * Cell colors derive solely from the per-item statuses the agreement
 * endpoint reports. Papers the report does not mention (not yet rated by
 * everyone) stay uncolored; the view never infers a status from votes on
 * its own.
 */

import { escapeHtml } from "./html.js";
import type { AgreementReportBody, ItemStatus } from "./types.js";

export type CellColor = "green" | "red" | "amber" | "none";

export const STATUS_COLORS: Record<ItemStatus, CellColor> = {
  agree_include: "green",
  agree_exclude: "red",
  disagree: "amber",
};

export function colorForStatus(status: ItemStatus | undefined): CellColor {
  return status === undefined ? "none" : STATUS_COLORS[status];
}

export interface MatrixCell {
  paper: string;
  status: ItemStatus | null;
  color: CellColor;
}

export function buildAgreementMatrix(papers: string[], report: AgreementReportBody): MatrixCell[] {
  return papers.map((paper) => {
    const status = report.per_item_status[paper];
    return {
      paper,
      status: status ?? null,
      color: colorForStatus(status),
    };
  });
}

export function renderAgreementMatrix(cells: MatrixCell[], caption = ""): string {
  const rows = cells
    .map(
      (cell) =>
        `<tr><th scope="row">${escapeHtml(cell.paper)}</th>` +
        `<td class="cell cell-${cell.color}" data-status="${cell.status ?? ""}">` +
        `${cell.status ? escapeHtml(cell.status) : "&#8211;"}</td></tr>`,
    )
    .join("");
  const head = caption ? `<caption>${escapeHtml(caption)}</caption>` : "";
  return `<table class="agreement-matrix">${head}<tbody>${rows}</tbody></table>`;
}
