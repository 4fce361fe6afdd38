/** Browser entry: connect to the service, create or resume a session. */

import { FlameClient } from "./api.js";
import { LabelApp } from "./app.js";

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

function renderCreateForm(root: HTMLElement, onCreate: (
  service: string, pool: string, query: string, shots: number, seed: number,
) => void): void {
  const doc = root.ownerDocument;
  const form = doc.createElement("form");
  form.className = "create-form";
  const fields: Array<[string, string, string]> = [
    ["service", "service URL", "http://127.0.0.1:8400"],
    ["pool", "pool path (on the service host)", "demo_data/pool.jsonl"],
    ["query", "query path", "demo_data/query.json"],
    ["shots", "shots K", "30"],
    ["seed", "seed", "0"],
  ];
  const inputs: Record<string, HTMLInputElement> = {};
  for (const [key, label, initial] of fields) {
    const row = doc.createElement("label");
    row.textContent = `${label}: `;
    const input = doc.createElement("input");
    input.name = key;
    input.value = initial;
    row.appendChild(input);
    form.appendChild(row);
    inputs[key] = input;
  }
  const button = doc.createElement("button");
  button.type = "submit";
  button.textContent = "create session";
  form.appendChild(button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    onCreate(inputs.service.value, inputs.pool.value, inputs.query.value,
      Number(inputs.shots.value), Number(inputs.seed.value));
  });
  root.appendChild(form);
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const service = param("service") ?? "http://127.0.0.1:8400";
  const session = param("session");
  const client = new FlameClient(service);
  const app = new LabelApp({ root, client, storage: window.localStorage });
  window.addEventListener("keydown", (event) => {
    if ((event.target as HTMLElement | null)?.tagName === "INPUT") return;
    app.handleKey(event.key);
  });
  if (session) {
    await app.loadSession(session);
    return;
  }
  renderCreateForm(root, (serviceUrl, pool, query, shots, seed) => {
    void (async () => {
      const freshClient = new FlameClient(serviceUrl);
      const created = await freshClient.createSession(pool, query, {
        shots_k: shots,
        seed,
      });
      const url = new URL(window.location.href);
      url.searchParams.set("service", serviceUrl);
      url.searchParams.set("session", created.session_id);
      window.history.replaceState(null, "", url.toString());
      const freshApp = new LabelApp({
        root,
        client: freshClient,
        storage: window.localStorage,
      });
      window.addEventListener("keydown", (event) => {
        if ((event.target as HTMLElement | null)?.tagName === "INPUT") return;
        freshApp.handleKey(event.key);
      });
      await freshApp.loadSession(created.session_id);
    })();
  });
}

void boot();
