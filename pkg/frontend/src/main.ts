/**
 * Browser entry point: mounts the screening interface into a root element.
 *
 * Everything shown is fetched from the service; the page keeps nothing
 * authoritative, so reloading mid-session reproduces the same screen from
 * the server's answers alone.
 */

import { ApiError, FetchTransport, ReviewApi } from "./api.js";
import { attachScreeningKeys } from "./keyboard.js";
import { buildAgreementMatrix, renderAgreementMatrix } from "./matrix.js";
import { clampPollInterval, Poller } from "./poll.js";
import { ScreeningController, ScreeningQueue } from "./queue.js";
import type { ProjectSummary, RecordDetailResponse } from "./types.js";
import { renderScreeningView } from "./views.js";

export interface MountConfig {
  baseUrl: string;
  token: string;
  pollMs?: number;
}

export interface MountHandle {
  stop(): void;
}

export async function mount(root: HTMLElement, config: MountConfig): Promise<MountHandle> {
  const api = new ReviewApi(new FetchTransport(config.baseUrl), config.token);
  const queue = new ScreeningQueue(api);
  const controller = new ScreeningController(queue);
  let project: ProjectSummary = await api.project();
  let notice = "";

  const render = async (): Promise<void> => {
    const paper = queue.current();
    let detail: RecordDetailResponse | null = null;
    if (paper !== null) {
      detail = await api.record(paper);
    }
    root.innerHTML = renderScreeningView({
      record: detail ? detail.record : null,
      criteria: detail ? detail.criteria : project.criteria,
      scale: project.scale,
      progress: queue.progress(),
      parkedPaper: queue.parked()?.paper ?? null,
      notice,
    });
    const matrixHost = document.createElement("div");
    matrixHost.className = "matrix-host";
    try {
      const report = await api.agreement();
      const page = await api.records(undefined, 1, 500);
      const cells = buildAgreementMatrix(
        page.records.map((r) => r.no),
        report,
      );
      matrixHost.innerHTML = renderAgreementMatrix(cells, "Inter-reviewer agreement");
    } catch {
      matrixHost.innerHTML = "";
    }
    root.appendChild(matrixHost);
  };

  const refresh = async (): Promise<void> => {
    project = await api.project();
    await queue.refresh();
    await render();
  };

  await queue.refresh();
  await render();

  const detachKeys = attachScreeningKeys(
    document,
    () => project.scale,
    (action) => {
      controller.handle(action);
      void controller.flush().then(async () => {
        const last = controller.outcomes[controller.outcomes.length - 1];
        if (last && last.kind === "rejected") {
          notice = `vote on ${last.paper} rejected: ${(last.error as ApiError).message}`;
        } else {
          notice = "";
        }
        await render();
      });
    },
  );

  const poller = new Poller(refresh, clampPollInterval(config.pollMs ?? 3000));
  poller.start();

  return {
    stop(): void {
      poller.stop();
      detachKeys();
    },
  };
}
