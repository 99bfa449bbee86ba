import { ApiClient, ApiError } from "./api.js";
import { renderCosts, renderDag } from "./dag.js";
import { EventPoller } from "./poller.js";
import { renderWorklist } from "./worklist.js";
import type { InstanceSnapshot } from "./types.js";

/**
 * Console wiring: instance picker, worklist with role filter, DAG and
 * cost panels, and the simulated-clock control. All data comes from the
 * REST API; a 1 s event poll triggers refreshes.
 */
export class ConsoleApp {
  private poller: EventPoller | null = null;
  private instanceId: string | null = null;
  private roleFilter = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = `
      <header class="topbar">
        <h1>procforge console</h1>
        <span id="stale-indicator" class="stale-indicator" hidden>stale data - reconnecting</span>
      </header>
      <div class="columns">
        <section class="panel" id="left">
          <h2>Instances</h2>
          <select id="instance-select"></select>
          <h2>Worklist <input id="role-filter" placeholder="filter by role"></h2>
          <div id="worklist"></div>
          <h2>Clock</h2>
          <div class="clock-control">
            <input id="advance-seconds" type="number" min="1" value="3600">
            <button id="advance-button">advance simulated time</button>
            <span id="clock-error" class="worklist-error"></span>
          </div>
        </section>
        <section class="panel" id="right">
          <h2>Process <span id="instance-status"></span></h2>
          <div id="dag"></div>
          <h2>Costs</h2>
          <div id="costs"></div>
        </section>
      </div>`;

    this.el<HTMLInputElement>("role-filter").addEventListener("input", (ev) => {
      this.roleFilter = (ev.target as HTMLInputElement).value.trim();
      void this.refresh();
    });
    this.el<HTMLSelectElement>("instance-select").addEventListener("change", (ev) => {
      this.watch((ev.target as HTMLSelectElement).value);
    });
    this.el<HTMLButtonElement>("advance-button").addEventListener("click", () => {
      void this.advanceClock();
    });

    const { instances } = await this.client.listInstances();
    const select = this.el<HTMLSelectElement>("instance-select");
    for (const summary of instances) {
      const option = document.createElement("option");
      option.value = summary.instance_id;
      option.textContent = `${summary.instance_id} - ${summary.model_id} (${summary.status})`;
      select.appendChild(option);
    }
    const first = instances[0];
    if (first) this.watch(first.instance_id);
  }

  watch(instanceId: string): void {
    this.poller?.stop();
    this.instanceId = instanceId;
    this.poller = new EventPoller(
      this.client,
      instanceId,
      () => void this.refresh(),
      (stale) => {
        this.el("stale-indicator").hidden = !stale;
      },
    );
    this.poller.start();
    void this.refresh();
  }

  async refresh(): Promise<void> {
    if (this.instanceId === null) return;
    let snapshot: InstanceSnapshot;
    try {
      snapshot = await this.client.getInstance(this.instanceId);
    } catch (err) {
      this.el("stale-indicator").hidden = false;
      if (err instanceof ApiError && err.status === 404) {
        this.el("dag").textContent = `instance ${this.instanceId} not found`;
      }
      return;
    }
    this.el("stale-indicator").hidden = true;
    this.el("instance-status").textContent = `${snapshot.status} @ t=${snapshot.sim_time_s}s`;
    renderDag(this.el("dag"), snapshot);
    renderCosts(this.el("costs"), snapshot.costs, snapshot.sim_time_s);
    const { tasks } = await this.client.getWorklist(
      this.roleFilter || undefined,
      this.instanceId,
    );
    renderWorklist(this.el("worklist"), tasks, {
      submit: async (taskId, role, label) => {
        await this.client.completeTask(taskId, role, label);
        await this.refresh();
      },
    });
  }

  private async advanceClock(): Promise<void> {
    const errorEl = this.el("clock-error");
    errorEl.textContent = "";
    const seconds = Number(this.el<HTMLInputElement>("advance-seconds").value);
    try {
      await this.client.advanceClock(seconds);
      await this.refresh();
    } catch (err) {
      errorEl.textContent = err instanceof ApiError ? err.code : String(err);
    }
  }

  private el<T extends HTMLElement = HTMLElement>(id: string): T {
    const found = this.root.querySelector<T>(`#${id}`);
    if (!found) throw new Error(`missing element #${id}`);
    return found;
  }
}

export function mount(root: HTMLElement, baseUrl = ""): ConsoleApp {
  const app = new ConsoleApp(root, new ApiClient(baseUrl));
  void app.start();
  return app;
}
