/** Wire types mirroring the backend's JSON bodies. */

export type MessageType = 'ReflectiveQuestion' | 'DesignSuggestion' | 'SoftwareTip';

export type TaskPhase =
  | 'Planning'
  | 'LoadSpecification'
  | 'ObstacleGeometry'
  | 'Manufacturability'
  | 'Simulation'
  | 'OutcomeEvaluation';

export type DecisionState = 'pending' | 'approved' | 'denied';

export const MESSAGE_TYPES: MessageType[] = [
  'ReflectiveQuestion',
  'DesignSuggestion',
  'SoftwareTip',
];

export const TASK_PHASES: TaskPhase[] = [
  'Planning',
  'LoadSpecification',
  'ObstacleGeometry',
  'Manufacturability',
  'Simulation',
  'OutcomeEvaluation',
];

export interface SessionManifest {
  id: string;
  title: string;
  duration: number;
  video_uri: string | null;
  transcript_uri: string;
  frames_dir: string;
  brief_uri: string | null;
  origin: 'imported' | 'live_recorded';
  created_at: string;
}

export interface Utterance {
  index: number;
  start: number;
  end: number;
  speaker: string;
  text: string;
}

export interface Decision {
  state: DecisionState;
  reason?: string;
}

export interface SupportMessage {
  id: string;
  session_id: string;
  t: number;
  msg_type: MessageType;
  phase: TaskPhase;
  phase_source: string;
  prompt_version: string;
  provider_id: string;
  text: string;
  decision: Decision;
  delivered_seq: number | null;
  created_at: string;
}

/** Generate response: the stored message plus classification facts. */
export interface GenerateResponse extends SupportMessage {
  classified_phase: TaskPhase | null;
  phase_confidence_raw: string;
  classify_version: string;
}

export interface RatingDto {
  score: number;
  rater: string;
  comment: string | null;
}

export interface AnnotationDto {
  label: string;
  note: string | null;
}

export interface CodingRow {
  message: SupportMessage;
  ratings: RatingDto[];
  annotations: AnnotationDto[];
}

/** One relay event as sent by the server; seq is strictly increasing. */
export interface RelayEvent {
  seq: number;
  at?: string;
  t: number;
  kind: string;
  body: Record<string, any>;
}

export function formatTimecode(millis: number): string {
  const total = Math.floor(millis / 1000);
  const hh = Math.floor(total / 3600);
  const mm = Math.floor((total % 3600) / 60);
  const ss = total % 60;
  const pad = (n: number) => String(n).padStart(2, '0');
  return `${pad(hh)}:${pad(mm)}:${pad(ss)}`;
}
