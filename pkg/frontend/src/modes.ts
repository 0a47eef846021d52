// Analysis parameter choices as the user sees them, mapped onto the
// service's mode vocabulary. The mapping is a bijection; both directions
// are exported so tests can verify request payloads round-trip.

export type AnalysisChoice = "quantity" | "class" | "both";
export type ServerMode = "count" | "binary" | "multiclass";

export const MODE_FOR_CHOICE: Record<AnalysisChoice, ServerMode> = {
  quantity: "count",
  class: "binary",
  both: "multiclass",
};

export const CHOICES: AnalysisChoice[] = ["quantity", "class", "both"];

export function serverMode(choice: AnalysisChoice): ServerMode {
  return MODE_FOR_CHOICE[choice];
}

export function choiceForMode(mode: ServerMode): AnalysisChoice {
  for (const choice of CHOICES) {
    if (MODE_FOR_CHOICE[choice] === mode) return choice;
  }
  throw new Error(`no analysis choice maps to mode ${mode}`);
}
