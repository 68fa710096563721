import { ParticipantFeed } from './participant.js';
import { RelayClient } from './relay.js';

// Participant page: connects as the user role and renders approved
// messages newest-first in a compact always-visible panel.

const panel = document.getElementById('messages') as HTMLElement;
const status = document.getElementById('status') as HTMLElement;
const speakToggle = document.getElementById('speak') as HTMLInputElement;

const params = new URLSearchParams(location.search);
const sessionId = params.get('session') ?? 'live-1';

const feed = new ParticipantFeed({
  get speak() {
    return speakToggle.checked;
  },
  onApplied(msg) {
    const card = document.createElement('div');
    card.className = 'message-card';
    card.textContent = msg.text;
    panel.prepend(card);
    client.send('ack', 0, { message_id: msg.messageId });
  },
});

const client = new RelayClient({
  wsBase: location.origin.replace(/^http/, 'ws'),
  sessionId,
  role: 'user',
  onStatus: (s) => {
    status.textContent = s;
    if (s === 'closed') setTimeout(() => client.connect(), 1000);
  },
  onEvent: (ev) => {
    if (ev.kind === 'deliver') feed.applyDeliver(ev);
  },
});

client.connect();
