// UI state: selected group, intervention draft, last response, exploration
// history. At most one what-if request is in flight; submit stays disabled
// until the previous one settles.

import type { WhatifPayload } from "./api.js";
import {
  InterventionDraft,
  InterventionJson,
  draftIsEmpty,
  draftIsValid,
  emptyDraft,
} from "./intervention.js";

export type Exploration = {
  seq: number;
  groupKey: string;
  intervention: InterventionJson;
  response: WhatifPayload;
};

export type UiState = {
  selectedGroup: string | null;
  draft: InterventionDraft;
  inFlight: boolean;
  lastResponse: WhatifPayload | null;
  lastError: string | null;
  history: Exploration[];
};

export function initialState(): UiState {
  return {
    selectedGroup: null,
    draft: emptyDraft(),
    inFlight: false,
    lastResponse: null,
    lastError: null,
    history: [],
  };
}

export function selectGroup(state: UiState, key: string): UiState {
  return { ...state, selectedGroup: key, draft: emptyDraft(), lastResponse: null, lastError: null };
}

export function canSubmit(state: UiState): boolean {
  return (
    state.selectedGroup !== null &&
    !state.inFlight &&
    draftIsValid(state.draft) &&
    !draftIsEmpty(state.draft)
  );
}

export function beginRequest(state: UiState): UiState {
  if (state.inFlight) {
    throw new Error("a what-if request is already in flight");
  }
  return { ...state, inFlight: true, lastError: null };
}

export function completeRequest(
  state: UiState,
  intervention: InterventionJson,
  response: WhatifPayload,
): UiState {
  const entry: Exploration = {
    seq: state.history.length + 1,
    groupKey: state.selectedGroup ?? "",
    intervention,
    response,
  };
  return {
    ...state,
    inFlight: false,
    lastResponse: response,
    history: [...state.history, entry],
  };
}

export function failRequest(state: UiState, message: string): UiState {
  return { ...state, inFlight: false, lastError: message };
}
