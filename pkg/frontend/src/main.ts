import { ApiClient } from "./client.js";
import { RunController } from "./controller.js";
import { renderApp } from "./render.js";

const client = new ApiClient("");
const controller = new RunController(client);
const root = document.getElementById("app") as HTMLElement;
const picker = document.getElementById("runs") as HTMLSelectElement;

function refresh(): void {
  renderApp(root, controller, refresh);
}

async function openRun(runId: string): Promise<void> {
  await controller.load(runId);
  refresh();
}

async function boot(): Promise<void> {
  try {
    const runs = await client.listRuns();
    picker.textContent = "";
    for (const run of runs) {
      const option = document.createElement("option");
      option.value = run.id;
      option.textContent = `${run.id} (${run.kind})`;
      picker.appendChild(option);
    }
    picker.onchange = () => void openRun(picker.value);
    if (runs.length) await openRun(runs[0]!.id);
  } catch (err) {
    root.textContent = `cannot reach server: ${err instanceof Error ? err.message : err}`;
  }
}

void boot();
