// Session state kept free of DOM concerns so it can be tested directly:
// the annotation form, record construction, and the unsent-work buffer
// that survives network failures.

import type { AnnotationBody, Emotion, Sentiment, SubmitAck } from "./types";
import { NEUTRAL_VAD } from "./types";

export type FormState = {
  emotion: Emotion | null;
  sentiment: Sentiment | null;
  vad: [number, number, number];
  inaudible: boolean;
};

/** Fresh form: nothing chosen, sliders at the neutral (5,5,5) anchor. */
export function emptyForm(): FormState {
  return {
    emotion: null,
    sentiment: null,
    vad: [...NEUTRAL_VAD] as [number, number, number],
    inaudible: false
  };
}

/** The exact request body the backend expects for this form. */
export function buildRecord(
  annotatorId: string,
  utteranceId: string,
  form: FormState
): AnnotationBody {
  if (form.inaudible) {
    return {
      annotator_id: annotatorId,
      utterance_id: utteranceId,
      emotion: null,
      sentiment: null,
      vad: null,
      skipped_inaudible: true
    };
  }
  return {
    annotator_id: annotatorId,
    utterance_id: utteranceId,
    emotion: form.emotion,
    sentiment: form.sentiment,
    vad: [...form.vad] as [number, number, number],
    skipped_inaudible: false
  };
}

/**
 * Holds submissions the server has not acknowledged yet. Failed sends stay
 * queued in order; a flush retries front to back and stops at the first
 * failure so ordering is preserved.
 */
export class RetryBuffer {
  private pending: AnnotationBody[] = [];

  get size(): number {
    return this.pending.length;
  }

  get records(): readonly AnnotationBody[] {
    return this.pending;
  }

  push(record: AnnotationBody): void {
    this.pending.push(record);
  }

  async flush(
    submit: (record: AnnotationBody) => Promise<SubmitAck>
  ): Promise<number> {
    let sent = 0;
    while (this.pending.length > 0) {
      try {
        await submit(this.pending[0]);
      } catch {
        break;
      }
      this.pending.shift();
      sent++;
    }
    return sent;
  }
}
