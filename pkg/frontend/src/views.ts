/**
 * String-rendered views. Rendering is a pure function of data fetched from
 * the server, so the same state always produces the same markup and a
 * reload rebuilds the exact screen the reviewer left.
 */

import { escapeHtml } from "./html.js";
import type { Progress } from "./queue.js";
import type { CriterionInfo, RecordDetail, ScaleInfo, VoteBody } from "./types.js";
import type { WorkshopItem } from "./workshop.js";

/**
 * The vote buttons mirror the project scale exactly: a binary project gets
 * 0/1, a 1..5 project gets five buttons. There is no way to render a
 * button for a value outside the scale.
 */
export function renderScaleControl(scale: ScaleInfo): string {
  const buttons: string[] = [];
  for (let value = scale.lo; value <= scale.hi; value += 1) {
    const label = scale.neutral === value ? `${value} (neutral)` : String(value);
    buttons.push(
      `<button type="button" class="vote-key" data-value="${value}">${escapeHtml(label)}</button>`,
    );
  }
  return `<div class="scale-control" data-kind="${escapeHtml(scale.kind)}">${buttons.join("")}</div>`;
}

export function renderProgress(progress: Progress): string {
  return (
    `<p class="progress">Voted <span class="progress-voted">${progress.voted}</span>` +
    ` of <span class="progress-assigned">${progress.assigned}</span>` +
    ` assigned papers (<span class="progress-remaining">${progress.remaining}</span> remaining)</p>`
  );
}

function renderCriteria(criteria: CriterionInfo[]): string {
  const rows = criteria
    .map(
      (c) =>
        `<li class="criterion criterion-${escapeHtml(c.kind)}">` +
        `<strong>${escapeHtml(c.id)}</strong> ${escapeHtml(c.text)}</li>`,
    )
    .join("");
  return `<ul class="criteria">${rows}</ul>`;
}

export interface ScreeningViewState {
  record: RecordDetail | null;
  criteria: CriterionInfo[];
  scale: ScaleInfo;
  progress: Progress;
  parkedPaper: string | null;
  notice: string;
}

export function renderScreeningView(state: ScreeningViewState): string {
  const parts: string[] = ['<section class="screening">'];
  parts.push(renderProgress(state.progress));
  if (state.parkedPaper) {
    parts.push(
      `<p class="parked-note">A vote on ${escapeHtml(state.parkedPaper)} could not reach` +
        " the server; press r (or vote again) to retry.</p>",
    );
  }
  if (state.notice) {
    parts.push(`<p class="notice">${escapeHtml(state.notice)}</p>`);
  }
  if (state.record === null) {
    parts.push('<p class="done">No papers waiting for your vote.</p>');
  } else {
    const record = state.record;
    parts.push(`<h2 class="paper-title">${escapeHtml(record.title)}</h2>`);
    parts.push(
      `<p class="paper-meta">${escapeHtml(record.no)} &middot; ` +
        `${escapeHtml(record.source_venue)} &middot; ${record.year ?? "n.d."}</p>`,
    );
    if (record.keywords.length > 0) {
      parts.push(`<p class="keywords">${escapeHtml(record.keywords.join(", "))}</p>`);
    }
    parts.push(`<p class="abstract">${escapeHtml(record.abstract)}</p>`);
    parts.push(renderCriteria(state.criteria));
    parts.push(renderScaleControl(state.scale));
  }
  parts.push("</section>");
  return parts.join("");
}

function renderVotes(votes: VoteBody[]): string {
  const cells = votes
    .map(
      (v) =>
        `<td class="side-vote" data-reviewer="${escapeHtml(v.reviewer)}">` +
        `${escapeHtml(v.reviewer)}: ${v.value} (round ${v.round})</td>`,
    )
    .join("");
  return `<tr class="votes-side-by-side">${cells}</tr>`;
}

export function renderWorkshopItem(item: WorkshopItem, criteria: CriterionInfo[]): string {
  return (
    `<article class="workshop-item" data-paper="${escapeHtml(item.paper)}">` +
    `<h3>${escapeHtml(item.title)}</h3>` +
    `<table class="vote-table"><tbody>${renderVotes(item.votes)}</tbody></table>` +
    renderCriteria(criteria.filter((c) => c.kind === "exclusion")) +
    "</article>"
  );
}
