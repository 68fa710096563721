import { ApiClient, GenerateParams } from './api.js';
import { clampPlayhead } from './transcriptSync.js';
import {
  GenerateResponse,
  MessageType,
  SessionManifest,
  SupportMessage,
  TaskPhase,
  Utterance,
} from './types.js';

export type ConnectionStatus = 'offline' | 'connecting' | 'open' | 'closed';

/**
 * All console state lives here and round-trips through the backend; a
 * page reload rebuilds an identical view from the API alone.
 */
export class ConsoleState {
  session: SessionManifest | null = null;
  utterances: Utterance[] = [];
  brief: string | null = null;
  playhead = 0;
  promptDraft = '';
  messages: SupportMessage[] = [];
  lastResult: GenerateResponse | null = null;
  liveMode = false;
  connectionStatus: ConnectionStatus = 'offline';

  private inFlightAt: number | null = null;

  constructor(public api: ApiClient) {}

  async loadSession(sessionId: string): Promise<void> {
    const { sessions } = await this.api.listSessions();
    const manifest = sessions.find((s) => s.id === sessionId);
    if (!manifest) throw new Error(`unknown session ${sessionId}`);
    this.session = manifest;
    this.utterances = await this.api.transcript(sessionId);
    this.brief = manifest.brief_uri ? await this.api.brief(sessionId) : null;
    this.messages = await this.api.messages(sessionId);
    this.playhead = 0;
    this.lastResult = null;
  }

  async reloadMessages(): Promise<void> {
    if (!this.session) return;
    this.messages = await this.api.messages(this.session.id);
  }

  seek(t: number): void {
    if (!this.session) return;
    this.playhead = clampPlayhead(t, this.session.duration);
  }

  /** Generate controls stay disabled while a request for this playhead runs. */
  canGenerate(): boolean {
    return this.session !== null && this.inFlightAt !== this.playhead;
  }

  async generate(msgType: MessageType, phaseOverride?: TaskPhase): Promise<GenerateResponse> {
    if (!this.session) throw new Error('no session selected');
    if (!this.canGenerate()) throw new Error('generation already in flight');
    const params: GenerateParams = { t: this.playhead, msg_type: msgType };
    if (phaseOverride) params.phase_override = phaseOverride;
    if (this.promptDraft.trim()) params.system_prompt_override = this.promptDraft;
    this.inFlightAt = this.playhead;
    try {
      const result = await this.api.generate(this.session.id, params);
      this.lastResult = result;
      await this.reloadMessages();
      return result;
    } finally {
      this.inFlightAt = null;
    }
  }

  /** Denials need a reason; the button stays disabled until one is typed. */
  canDeny(reason: string): boolean {
    return reason.trim().length > 0;
  }

  async decide(messageId: string, state: 'approved' | 'denied', reason?: string): Promise<void> {
    if (state === 'denied' && !this.canDeny(reason ?? '')) {
      throw new Error('a denial requires a reason');
    }
    await this.api.decide(messageId, state, reason);
    await this.reloadMessages();
  }

  async rate(messageId: string, score: number, rater: string, comment?: string): Promise<void> {
    await this.api.rate(messageId, score, rater, comment);
  }
}
