// Intervention draft model and its canonical serialization.
//
// canonicalJson must produce byte-identical output to the backend's
// json.dumps(obj, sort_keys=True, separators=(",", ":")) for the values
// that appear on this wire; the builtin scenarios are pinned against
// fixtures generated by the backend (see fixtures/builtin_scenarios.json).

export type InterventionOp =
  | { op: "set"; feature: string; value: number }
  | { op: "scale"; feature: string; factor: number }
  | { op: "shift_sku"; from_sku: string; to_sku: string };

export type InterventionJson = { ops: InterventionOp[] };

export type FeatureOverride = { feature: string; value: number };

export type InterventionDraft = {
  spareTokensOff: boolean;
  loadBalance: boolean;
  skuShift: { from: string; to: string } | null;
  overrides: FeatureOverride[];
};

export function emptyDraft(): InterventionDraft {
  return { spareTokensOff: false, loadBalance: false, skuShift: null, overrides: [] };
}

export function skusFromFeatures(features: Record<string, number>): string[] {
  const prefix = "cpu_util_std.";
  return Object.keys(features)
    .filter((name) => name.startsWith(prefix))
    .map((name) => name.slice(prefix.length))
    .sort();
}

export function draftToIntervention(
  draft: InterventionDraft,
  skus: string[],
): InterventionJson {
  const ops: InterventionOp[] = [];
  if (draft.spareTokensOff) {
    ops.push({ op: "set", feature: "spare_token_avg", value: 0 });
  }
  if (draft.skuShift) {
    ops.push({ op: "shift_sku", from_sku: draft.skuShift.from, to_sku: draft.skuShift.to });
  }
  if (draft.loadBalance) {
    for (const sku of [...skus].sort()) {
      ops.push({ op: "set", feature: `cpu_util_std.${sku}`, value: 0 });
    }
  }
  for (const { feature, value } of draft.overrides) {
    ops.push({ op: "set", feature, value });
  }
  return { ops };
}

export function draftIsValid(draft: InterventionDraft): boolean {
  if (draft.skuShift && (!draft.skuShift.from || !draft.skuShift.to)) return false;
  if (draft.skuShift && draft.skuShift.from === draft.skuShift.to) return false;
  return draft.overrides.every(
    (o) => o.feature.length > 0 && Number.isFinite(o.value),
  );
}

export function draftIsEmpty(draft: InterventionDraft): boolean {
  return (
    !draft.spareTokensOff &&
    !draft.loadBalance &&
    draft.skuShift === null &&
    draft.overrides.length === 0
  );
}

// Sorted-key, compact JSON; mirrors the backend's canonical writer.
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value === "number" || typeof value === "boolean") {
    return JSON.stringify(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .filter(([, v]) => v !== undefined)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
  const body = entries
    .map(([k, v]) => `${JSON.stringify(k)}:${canonicalJson(v)}`)
    .join(",");
  return `{${body}}`;
}

export function whatifRequestBody(
  groupKey: string,
  intervention: InterventionJson,
): string {
  return canonicalJson({ group_key: groupKey, intervention });
}
