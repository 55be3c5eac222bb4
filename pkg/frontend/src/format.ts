/**
 * Rendering helpers. Every domain figure goes through fig(), which emits
 * the gateway value verbatim inside a data-fig span; the fidelity tests
 * assert each such span matches a value from the recorded responses
 * character for character. Formatting (units, rounding, truncation) is
 * deliberately absent.
 */

import type { Vector } from "./types.js";

export function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Identity rendering of a gateway value; null and undefined show as a dash. */
export function show(value: unknown): string {
  if (value === null || value === undefined) return "—";
  return String(value);
}

export function fig(value: unknown): string {
  if (value === null || value === undefined) return "—";
  return `<span data-fig>${esc(String(value))}</span>`;
}

/** cpu/mem/disk triple as three separate verbatim figures. */
export function vec(v: Vector): string {
  return `${fig(v.cpu)}c ${fig(v.mem)}g ${fig(v.disk)}d`;
}

/**
 * Fraction strings ("3/2", "16") to floats, used only for presentation
 * geometry (bar widths); never for displayed text.
 */
export function fractionToFloat(text: string): number {
  const slash = text.indexOf("/");
  if (slash < 0) return Number(text);
  const num = Number(text.slice(0, slash));
  const den = Number(text.slice(slash + 1));
  return den === 0 ? 0 : num / den;
}

/** Width percentage of the used portion of a resource bar. */
export function usedPercent(free: string, total: string): number {
  const t = fractionToFloat(total);
  if (t <= 0) return 0;
  const used = t - fractionToFloat(free);
  return Math.min(100, Math.max(0, (used / t) * 100));
}
