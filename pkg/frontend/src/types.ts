// Shapes shared with the annotation backend. These mirror the HTTP payloads
// exactly; the client never invents fields the server does not know.

export const EMOTIONS = [
  "neutral",
  "happy",
  "sad",
  "excited",
  "anger",
  "fear",
  "surprised",
  "frustrated",
  "disgust"
] as const;

export type Emotion = (typeof EMOTIONS)[number];

export const SENTIMENTS = ["negative", "neutral", "positive"] as const;

export type Sentiment = (typeof SENTIMENTS)[number];

export const VAD_MIN = 1;
export const VAD_MAX = 10;
export const NEUTRAL_VAD: readonly [number, number, number] = [5, 5, 5];

export type Task = {
  utterance_id: string;
  clip_url: string;
  transcript: string;
  policy: string;
  position: number;
  total: number;
};

export type AnnotationBody = {
  annotator_id: string;
  utterance_id: string;
  emotion: Emotion | null;
  sentiment: Sentiment | null;
  vad: [number, number, number] | null;
  skipped_inaudible: boolean;
};

export type SubmitAck = {
  status: string;
  superseded: boolean;
};

export type AgreementResult = {
  a: string;
  b: string;
  field: string;
  kappa: number;
  n_overlap: number;
};

export type Progress = {
  annotators: Record<string, { done: number; total: number }>;
  utterances: { total: number; fully_annotated: number };
  per_utterance: number;
};
