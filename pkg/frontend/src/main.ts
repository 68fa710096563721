import { ApiClient } from './api.js';
import { ConsoleState } from './consoleState.js';
import { CodingView } from './views/codingView.js';
import { GeneratePanel } from './views/generatePanel.js';
import { LiveView } from './views/liveView.js';
import { ReplayView } from './views/replayView.js';

const api = new ApiClient('');
const state = new ConsoleState(api);

const sessionSelect = document.getElementById('session-select') as HTMLSelectElement;
const replayRoot = document.getElementById('replay') as HTMLElement;
const generateRoot = document.getElementById('generate') as HTMLElement;
const codingRoot = document.getElementById('coding') as HTMLElement;
const liveRoot = document.getElementById('live') as HTMLElement;
const liveToggle = document.getElementById('live-toggle') as HTMLButtonElement;
const warningsBox = document.getElementById('warnings') as HTMLElement;

const generatePanel = new GeneratePanel(generateRoot, state);
const replayView = new ReplayView(replayRoot, state, () => generatePanel.refresh());
const codingView = new CodingView(codingRoot, state, (t) => replayView.seekTo(t));
const wsBase = location.origin.replace(/^http/, 'ws');
const liveView = new LiveView(liveRoot, state, api, wsBase);

async function selectSession(id: string): Promise<void> {
  await state.loadSession(id);
  replayView.render();
  generatePanel.refresh();
  await codingView.render();
}

async function boot(): Promise<void> {
  const { sessions, warnings } = await api.listSessions();
  warningsBox.textContent = warnings.join('; ');
  sessionSelect.innerHTML = '';
  for (const s of sessions) {
    const opt = document.createElement('option');
    opt.value = s.id;
    opt.textContent = `${s.title} (${s.origin})`;
    sessionSelect.appendChild(opt);
  }
  sessionSelect.addEventListener('change', () => void selectSession(sessionSelect.value));
  if (sessions.length > 0) await selectSession(sessions[0].id);
}

liveToggle.addEventListener('click', () => {
  if (state.liveMode) {
    liveView.leave();
    liveToggle.textContent = 'Go live';
  } else {
    const id = prompt('Live session id?', sessionSelect.value || 'live-1');
    if (id) {
      liveView.join(id);
      liveToggle.textContent = 'Leave live';
    }
  }
});

void boot().catch((e) => {
  warningsBox.textContent = e instanceof Error ? e.message : String(e);
});
