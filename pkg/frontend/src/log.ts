/** Session-log export: the shared contract with the analysis pipeline. */

import { SessionState } from "./state.js";

export const DSL_VERSION = "pb-dsl-1";
export const SCHEMA_VERSION = 1;

export interface SessionLogFile {
  schema_version: number;
  experiment_id: string;
  participant_id: string;
  dsl_version: string;
  trials: unknown[];
}

export function exportLog(state: SessionState): SessionLogFile {
  if (state.completedTrials.length === 0) {
    throw new Error("nothing to export: no completed trials");
  }
  return {
    schema_version: SCHEMA_VERSION,
    experiment_id: state.experimentId,
    participant_id: state.participantId,
    dsl_version: DSL_VERSION,
    trials: state.completedTrials.map((t) => ({
      trial_index: t.trial_index,
      target_key: t.target_key,
      events: t.events,
      submitted_key: t.submitted_key,
      correct: t.correct,
      steps_committed: t.steps_committed,
    })),
  };
}

export function exportLogText(state: SessionState): string {
  return JSON.stringify(exportLog(state), null, 1) + "\n";
}
