// Per-tab session state. The console itself is stateless with respect to
// the engine: replaying the recorded history against the same model yields
// the same tables.

import type { DiagnoseResponse, SolveResponse } from "./api.js";

export interface HistoryEntry {
  view: string;
  request: unknown;
  response: unknown;
}

export interface RecourseDraft {
  altText: string;
  mode: "gumbel_max" | "interventional";
}

export interface LastDiagnosis {
  text: string;
  diagnose: DiagnoseResponse;
  solve: SolveResponse;
}

export class SessionState {
  observationText = "";
  selectedEnvironment: string | null = null;
  lastDiagnosis: LastDiagnosis | null = null;
  recourseDraft: RecourseDraft = { altText: "", mode: "gumbel_max" };

  private readonly history: HistoryEntry[] = [];
  private readonly sequences = new Map<string, number>();

  record(entry: HistoryEntry): void {
    this.history.push(entry);
  }

  getHistory(): readonly HistoryEntry[] {
    return this.history;
  }

  // One in-flight request per view: a response only counts if its ticket is
  // still the newest one issued for that view.
  nextSequence(view: string): number {
    const next = (this.sequences.get(view) ?? 0) + 1;
    this.sequences.set(view, next);
    return next;
  }

  isCurrent(view: string, ticket: number): boolean {
    return this.sequences.get(view) === ticket;
  }
}
