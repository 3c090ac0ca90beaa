/** Entry point: create a session and run the query/answer loop until stopped. */

import { SessionClient, SessionError } from "./client.js";
import type { AnswerSummary } from "./protocol.js";
import { QueryScreen, renderComplete } from "./ui.js";

async function runLoop(app: HTMLElement, client: SessionClient): Promise<void> {
  for (;;) {
    const view = await client.next();
    const done: Promise<AnswerSummary> = new Promise((resolve) => {
      const screen = new QueryScreen(view, async (queryId, payload, elapsedMs) => {
        const summary = await client.answer(queryId, payload, elapsedMs);
        resolve(summary);
        return summary;
      });
      app.textContent = "";
      app.appendChild(screen.root);
    });
    const summary = await done;
    if (summary.status === "stopped") {
      renderComplete(app, summary);
      return;
    }
  }
}

export async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app mount point");
  const params = new URLSearchParams(window.location.search);
  const configRef = params.get("config") ?? "configs/demo_session.json";
  const client = new SessionClient("");
  try {
    await client.create(configRef);
    await runLoop(app, client);
  } catch (err) {
    const msg = err instanceof SessionError ? err.message : String(err);
    app.textContent = "";
    const box = document.createElement("div");
    box.className = "error-box";
    box.textContent = `Session error: ${msg}`;
    app.appendChild(box);
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot();
}
