// Client-side form validation. Deliberately a superset of the server's
// rules so a request that passes here can never be rejected for range or
// shape reasons.

import { EMOTIONS, SENTIMENTS, VAD_MAX, VAD_MIN } from "./types";
import type { FormState } from "./state";

export type FieldErrors = Partial<Record<"emotion" | "sentiment" | "vad", string>>;

export function validateForm(form: FormState): FieldErrors {
  if (form.inaudible) return {};
  const errors: FieldErrors = {};
  if (form.emotion === null) {
    errors.emotion = "pick an emotion";
  } else if (!EMOTIONS.includes(form.emotion)) {
    errors.emotion = `unknown emotion ${form.emotion}`;
  }
  if (form.sentiment === null) {
    errors.sentiment = "pick a sentiment";
  } else if (!SENTIMENTS.includes(form.sentiment)) {
    errors.sentiment = `unknown sentiment ${form.sentiment}`;
  }
  for (const value of form.vad) {
    if (!Number.isInteger(value) || value < VAD_MIN || value > VAD_MAX) {
      errors.vad = `values must be whole numbers from ${VAD_MIN} to ${VAD_MAX}`;
      break;
    }
  }
  return errors;
}

export function canSubmit(form: FormState): boolean {
  return Object.keys(validateForm(form)).length === 0;
}

/** Force any slider-ish input onto the legal integer scale. */
export function clampVad(value: number): number {
  if (Number.isNaN(value)) return VAD_MIN;
  return Math.min(VAD_MAX, Math.max(VAD_MIN, Math.round(value)));
}
