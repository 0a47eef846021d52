// Display strings. Every numeric string shown on screen is the exact
// JavaScript rendering of a value taken from a server response; nothing is
// rounded or recomputed, so each one can be grepped in the response JSON.

export function displayNumber(value: number): string {
  return String(value);
}

/** "—" when the server reported null (no fruit counted). */
export function percentLabel(value: number | null): string {
  return value === null ? "—" : `${String(value)}%`;
}

export function countsLegend(counts: Record<string, number>):
    { stage: string; count: number; label: string }[] {
  return Object.entries(counts).map(([stage, count]) => ({
    stage,
    count,
    label: `${stage}: ${String(count)}`,
  }));
}

export function legendTotal(counts: Record<string, number>): number {
  return Object.values(counts).reduce((a, b) => a + b, 0);
}
