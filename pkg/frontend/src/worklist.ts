import { ApiError } from "./api.js";
import type { WorklistItem } from "./types.js";

export interface WorklistHandlers {
  /** Posts the completion; resolves on 2xx, rejects with ApiError otherwise. */
  submit(taskId: string, role: string, decisionLabel?: string): Promise<void>;
}

/**
 * Renders the open-task list. A decision task gets one button per guard
 * label; a plain manual task gets a single complete button. A rejected
 * submission shows the API error code inline and re-enables the buttons,
 * so nothing the user chose is lost.
 */
export function renderWorklist(
  root: HTMLElement,
  items: WorklistItem[],
  handlers: WorklistHandlers,
): void {
  root.textContent = "";
  if (items.length === 0) {
    const empty = document.createElement("div");
    empty.className = "worklist-empty";
    empty.textContent = "No tasks waiting for a human.";
    root.appendChild(empty);
    return;
  }
  for (const item of items) {
    root.appendChild(renderItem(item, handlers));
  }
}

function renderItem(item: WorklistItem, handlers: WorklistHandlers): HTMLElement {
  const card = document.createElement("div");
  card.className = "worklist-item";
  card.dataset.taskId = item.task_id;

  const title = document.createElement("div");
  title.className = "worklist-title";
  title.textContent = `${item.activity_id} (${item.instance_id})`;
  card.appendChild(title);

  const meta = document.createElement("div");
  meta.className = "worklist-meta";
  meta.textContent = `role ${item.role} - waiting since t=${item.waiting_since_s ?? 0}s`;
  card.appendChild(meta);

  const actions = document.createElement("div");
  actions.className = "worklist-actions";
  const error = document.createElement("span");
  error.className = "worklist-error";

  const buttons: HTMLButtonElement[] = [];
  const submit = async (label?: string) => {
    error.textContent = "";
    buttons.forEach((b) => (b.disabled = true));
    try {
      await handlers.submit(item.task_id, item.role, label);
    } catch (err) {
      error.textContent = err instanceof ApiError ? err.code : String(err);
      buttons.forEach((b) => (b.disabled = false));
    }
  };

  if (item.guard_options.length > 0) {
    for (const label of item.guard_options) {
      const button = document.createElement("button");
      button.className = "decision-button";
      button.dataset.label = label;
      button.textContent = label;
      button.addEventListener("click", () => void submit(label));
      buttons.push(button);
      actions.appendChild(button);
    }
  } else {
    const button = document.createElement("button");
    button.className = "complete-button";
    button.textContent = "complete";
    button.addEventListener("click", () => void submit());
    buttons.push(button);
    actions.appendChild(button);
  }
  actions.appendChild(error);
  card.appendChild(actions);
  return card;
}
