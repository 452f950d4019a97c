import type { RunController } from "./controller.js";
import type { NodeRow, RunView } from "./viewmodel.js";

/** Plain-DOM rendering of a run view; all interaction goes through the controller. */
export function renderApp(root: HTMLElement, controller: RunController,
                          onChanged: () => void): void {
  root.textContent = "";
  if (controller.banner) {
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.textContent = controller.banner;
    root.appendChild(banner);
    return;
  }
  const view = controller.view;
  if (!view) return;
  if (controller.stale) {
    const note = document.createElement("div");
    note.className = "banner stale";
    note.textContent = "this run changed elsewhere; showing the latest server state";
    root.appendChild(note);
  }
  if (view.options) {
    root.appendChild(renderOptions(view));
  } else if (view.rootDisplay !== null) {
    const rootScore = document.createElement("div");
    rootScore.className = "root-score";
    rootScore.textContent = `root probability ${view.rootDisplay}`;
    root.appendChild(rootScore);
  }
  root.appendChild(renderTree(view, controller, onChanged));
}

function renderOptions(view: RunView): HTMLElement {
  const panel = document.createElement("table");
  panel.className = "options";
  for (const option of view.options ?? []) {
    const row = panel.insertRow();
    row.className = option.chosen ? "chosen" : "";
    row.insertCell().textContent = option.chosen ? "▶" : "";
    row.insertCell().textContent = `(${option.index + 1}) ${option.hypothesis}`;
    row.insertCell().textContent = option.scoreDisplay;
  }
  return panel;
}

function renderTree(view: RunView, controller: RunController,
                    onChanged: () => void): HTMLElement {
  const list = document.createElement("div");
  list.className = "tree";
  for (const row of view.rows) {
    list.appendChild(renderRow(row, controller, onChanged));
  }
  return list;
}

function renderRow(row: NodeRow, controller: RunController,
                   onChanged: () => void): HTMLElement {
  const details = document.createElement("details");
  details.open = true;
  details.className = "node";
  details.style.marginLeft = `${row.depth * 1.5}rem`;
  const summary = document.createElement("summary");
  const claim = document.createElement("span");
  claim.textContent = row.claim;
  if (row.struck) claim.className = "pruned";
  if (row.changed) claim.classList.add("changed");
  summary.appendChild(claim);
  if (row.scoreDisplay !== null) {
    const score = document.createElement("span");
    score.className = "score" + (row.changed ? " changed" : "");
    score.textContent = ` ${row.scoreDisplay}` + (row.overridden ? " (edited)" : "");
    summary.appendChild(score);
  }
  details.appendChild(summary);

  for (const evidence of row.evidence) {
    const line = document.createElement("div");
    line.className = "evidence";
    line.textContent =
      `[${evidence.label}] ${evidence.text} — ${evidence.explanation} ` +
      `(${evidence.scoreDisplay})`;
    details.appendChild(line);
  }

  const controls = document.createElement("div");
  controls.className = "controls";
  const error = document.createElement("span");
  error.className = "inline-error";
  if (row.isLeaf) {
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = row.scoreDisplay ?? "score";
    input.size = 5;
    const apply = document.createElement("button");
    apply.textContent = "set score";
    apply.onclick = async () => {
      error.textContent = "";
      const result = await controller.submitCorrection(
        row.ref, { action: "set-score", value: input.value });
      if (!result.ok) error.textContent = result.error ?? "error";
      else onChanged();
    };
    controls.append(input, apply);
  }
  const prune = document.createElement("button");
  prune.textContent = row.pruned ? "restore" : "prune";
  prune.onclick = async () => {
    error.textContent = "";
    const result = await controller.submitCorrection(row.ref, { action: "toggle-prune" });
    if (!result.ok) error.textContent = result.error ?? "error";
    else onChanged();
  };
  controls.append(prune, error);
  details.appendChild(controls);
  return details;
}
