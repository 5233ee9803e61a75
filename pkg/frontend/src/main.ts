// DOM wiring for the what-if explorer. All computation happens server-side;
// this file only moves payloads between fetch and the renderers.

import {
  ApiError,
  GroupDetailPayload,
  fetchGroup,
  fetchGroups,
  fetchHealth,
  postWhatif,
} from "./api.js";
import {
  draftToIntervention,
  skusFromFeatures,
  whatifRequestBody,
} from "./intervention.js";
import {
  renderErrorBanner,
  renderGroupList,
  renderGroupView,
  renderHistory,
  renderWhatifResult,
} from "./render.js";
import {
  UiState,
  beginRequest,
  canSubmit,
  completeRequest,
  failRequest,
  initialState,
  selectGroup,
} from "./state.js";

let state: UiState = initialState();
let currentDetail: GroupDetailPayload | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function readDraftFromControls(): void {
  const spare = el<HTMLInputElement>("ctl-spare").checked;
  const balance = el<HTMLInputElement>("ctl-balance").checked;
  const from = el<HTMLSelectElement>("ctl-sku-from").value;
  const to = el<HTMLSelectElement>("ctl-sku-to").value;
  const overrideName = el<HTMLInputElement>("ctl-override-name").value.trim();
  const overrideValue = el<HTMLInputElement>("ctl-override-value").value.trim();
  const overrides =
    overrideName && overrideValue !== ""
      ? [{ feature: overrideName, value: Number(overrideValue) }]
      : [];
  state = {
    ...state,
    draft: {
      spareTokensOff: spare,
      loadBalance: balance,
      skuShift: from && to ? { from, to } : null,
      overrides,
    },
  };
  syncSubmit();
}

function syncSubmit(): void {
  el<HTMLButtonElement>("ctl-submit").disabled = !canSubmit(state);
}

function showError(message: string): void {
  el("banner").innerHTML = renderErrorBanner(message);
}

function clearError(): void {
  el("banner").innerHTML = "";
}

async function loadGroups(): Promise<void> {
  const payload = await fetchGroups(200);
  el("groups").innerHTML = renderGroupList(payload.groups, state.selectedGroup);
  for (const item of Array.from(document.querySelectorAll(".group-item"))) {
    item.addEventListener("click", () => {
      const key = (item as HTMLElement).dataset.key;
      if (key) void openGroup(key);
    });
  }
}

function populateSkuSelectors(features: Record<string, number>): void {
  const skus = skusFromFeatures(features);
  for (const id of ["ctl-sku-from", "ctl-sku-to"]) {
    const select = el<HTMLSelectElement>(id);
    select.innerHTML =
      `<option value="">-</option>` +
      skus.map((s) => `<option value="${s}">${s}</option>`).join("");
  }
}

async function openGroup(key: string): Promise<void> {
  clearError();
  try {
    const detail = await fetchGroup(key);
    currentDetail = detail;
    state = selectGroup(state, key);
    el("group-view").innerHTML = renderGroupView(detail);
    el("whatif-result").innerHTML = "";
    populateSkuSelectors(detail.features);
    await loadGroups();
    syncSubmit();
  } catch (err) {
    currentDetail = null;
    el("group-view").innerHTML = "";
    showError(err instanceof ApiError ? `${err.status}: ${err.message}` : String(err));
  }
}

async function submitWhatif(): Promise<void> {
  if (!canSubmit(state) || !state.selectedGroup || !currentDetail) return;
  const skus = skusFromFeatures(currentDetail.features);
  const intervention = draftToIntervention(state.draft, skus);
  const body = whatifRequestBody(state.selectedGroup, intervention);
  state = beginRequest(state);
  syncSubmit();
  try {
    const response = await postWhatif(body);
    state = completeRequest(state, intervention, response);
    el("whatif-result").innerHTML = renderWhatifResult(response);
    el("history").innerHTML = renderHistory(state.history);
    clearError();
  } catch (err) {
    state = failRequest(
      state,
      err instanceof ApiError ? `${err.status}: ${err.message}` : String(err),
    );
    showError(state.lastError ?? "request failed");
  }
  syncSubmit();
}

async function init(): Promise<void> {
  try {
    const health = await fetchHealth();
    el("health").textContent = health.status === "ok" ? "service: ok" : "service: degraded";
  } catch {
    el("health").textContent = "service: unreachable";
  }
  await loadGroups();
  for (const id of [
    "ctl-spare",
    "ctl-balance",
    "ctl-sku-from",
    "ctl-sku-to",
    "ctl-override-name",
    "ctl-override-value",
  ]) {
    el(id).addEventListener("change", readDraftFromControls);
    el(id).addEventListener("input", readDraftFromControls);
  }
  el("ctl-submit").addEventListener("click", () => void submitWhatif());
  el("history").innerHTML = renderHistory(state.history);
  syncSubmit();
}

void init();
