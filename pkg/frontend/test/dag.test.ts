import { describe, expect, it } from "vitest";

import { attemptBadge, computeLayout, renderCosts, renderDag } from "../src/dag.js";
import type { ActivityView, InstanceSnapshot } from "../src/types.js";

function activity(overrides: Partial<ActivityView> = {}): ActivityView {
  return {
    kind: "automated",
    role: "dev",
    state: "Pending",
    attempt: 0,
    decision_label: null,
    level: 0,
    placement: null,
    started_at_s: null,
    finished_at_s: null,
    ...overrides,
  };
}

function snapshot(): InstanceSnapshot {
  return {
    instance_id: "i-0001",
    model_id: "verify-release",
    status: "Running",
    sim_time_s: 5640,
    activities: {
      "spec-review": activity({ kind: "manual", state: "Completed", level: 0 }),
      build: activity({ state: "Completed", level: 1 }),
      "model-check": activity({
        state: "Running",
        level: 2,
        attempt: 1,
        placement: {
          cloud_id: "private",
          machine_type: "small",
          instance_count: 4,
          estimated_duration_s: 2625,
          estimated_cost: "0.20",
        },
      }),
      decision: activity({ kind: "manual", state: "Pending", level: 3 }),
      fix: activity({ state: "Pending", level: 4 }),
      package: activity({ state: "Skipped", level: 4 }),
    },
    edges: [
      { from: "spec-review", to: "build", guard: null },
      { from: "build", to: "model-check", guard: null },
      { from: "model-check", to: "decision", guard: null },
      { from: "decision", to: "fix", guard: "fail" },
      { from: "decision", to: "package", guard: "pass" },
    ],
    artifacts: [["requirements", 1]],
    costs: { per_cloud: { private: "0.30", public: "0" }, total: "0.30" },
    last_seq: 12,
  };
}

describe("computeLayout", () => {
  it("places levels in columns and sorts rows by id", () => {
    const layout = computeLayout(snapshot());
    expect(layout.get("spec-review")!.x).toBe(0);
    expect(layout.get("build")!.x).toBeGreaterThan(0);
    const fix = layout.get("fix")!;
    const pkg = layout.get("package")!;
    expect(fix.x).toBe(pkg.x);
    expect(fix.y).toBeLessThan(pkg.y); // "fix" sorts before "package"
  });
});

describe("renderDag", () => {
  it("mirrors exactly the states in the snapshot", () => {
    const root = document.createElement("div");
    const snap = snapshot();
    renderDag(root, snap);
    const rendered: Record<string, string> = {};
    for (const node of root.querySelectorAll<HTMLElement>(".dag-node")) {
      rendered[node.dataset.activity!] = node.dataset.state!;
    }
    const expected = Object.fromEntries(
      Object.entries(snap.activities).map(([aid, view]) => [aid, view.state]),
    );
    expect(rendered).toEqual(expected);
  });

  it("marks skipped nodes visually distinct", () => {
    const root = document.createElement("div");
    renderDag(root, snapshot());
    const skipped = root.querySelector('[data-activity="package"]')!;
    expect(skipped.classList.contains("state-Skipped")).toBe(true);
  });

  it("labels guarded edges", () => {
    const root = document.createElement("div");
    renderDag(root, snapshot());
    const labels = [...root.querySelectorAll(".dag-guard-label")].map((l) => l.textContent);
    expect(labels.sort()).toEqual(["fail", "pass"]);
  });

  it("badges a rescaled elastic activity", () => {
    const root = document.createElement("div");
    renderDag(root, snapshot());
    const badge = root.querySelector('[data-activity="model-check"] .dag-node-badge');
    expect(badge!.textContent).toBe("attempt 2, 4 instances");
  });

  it("plain single-instance activities carry no badge", () => {
    expect(attemptBadge(activity())).toBeNull();
    expect(
      attemptBadge(
        activity({
          placement: {
            cloud_id: "public",
            machine_type: "small",
            instance_count: 1,
            estimated_duration_s: 60,
            estimated_cost: "0.05",
          },
        }),
      ),
    ).toBeNull();
  });
});

describe("renderCosts", () => {
  it("lists per-cloud amounts and the total", () => {
    const root = document.createElement("div");
    renderCosts(root, { per_cloud: { private: "0.30", public: "0" }, total: "0.30" }, 5640);
    expect(root.querySelector('[data-cloud="private"]')!.textContent).toBe("private: 0.30");
    expect(root.querySelector(".cost-total")!.textContent).toBe("total: 0.30");
    expect(root.querySelector(".cost-clock")!.textContent).toContain("5640");
  });
});
