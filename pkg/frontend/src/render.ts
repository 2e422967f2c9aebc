// Pure renderers: API payload in, HTML string out. No state, no fetch, and
// no invented statuses -- every status or reason shown is the API's string,
// escaped but otherwise untouched. That keeps the whole layer testable
// against recorded fixtures without a DOM.

import type {
  AttendanceResponse,
  ChatResponse,
  EnvironmentResponse,
  QuizResponse,
  SessionOut,
  StudentOut,
} from "./api.js";

export function esc(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${esc(message)}</div>`;
}

// -- attendance ---------------------------------------------------------------

export function renderAttendanceTable(data: AttendanceResponse, changed: Set<string> = new Set()): string {
  const rows = data.results
    .map((row) => {
      const cls = changed.has(row.student_id) ? ' class="row-changed"' : "";
      const evidence = row.evidence ? `#${row.evidence[0]} / #${row.evidence[1]}` : "";
      return (
        `<tr${cls} data-student="${esc(row.student_id)}">` +
        `<td>${esc(row.display_name)}</td>` +
        `<td><span class="badge status-${esc(row.status)}" data-status="${esc(row.status)}">${esc(row.status)}</span></td>` +
        `<td data-reason="${esc(row.reason)}">${esc(row.reason)}</td>` +
        `<td class="evidence">${esc(evidence)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="attendance" data-session="${esc(data.session_id)}" data-state="${esc(data.state)}">` +
    `<thead><tr><th>student</th><th>status</th><th>reason</th><th>evidence</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderSessionOptions(sessions: SessionOut[]): string {
  return sessions
    .map((s) => `<option value="${esc(s.session_id)}">${esc(s.class_id)} (${esc(s.state)})</option>`)
    .join("");
}

// -- chat -----------------------------------------------------------------------

export interface ChatEntry {
  question: string;
  answer?: ChatResponse;
  deniedReason?: string; // API reason string from a 403 body
  error?: string; // transport or non-gate error text
}

export function renderChatTranscript(entries: ChatEntry[]): string {
  const blocks = entries.map((entry) => {
    const parts = [`<div class="bubble question">${esc(entry.question)}</div>`];
    if (entry.answer) {
      const citations = entry.answer.citations
        .map((c) => `<span class="citation" data-chunk="${esc(c)}">[chunk ${esc(c)}]</span>`)
        .join(" ");
      parts.push(
        `<div class="bubble answer" data-generator="${esc(entry.answer.generator_id)}">` +
          `${esc(entry.answer.answer)}<div class="citations">${citations}</div></div>`,
      );
    } else if (entry.deniedReason !== undefined) {
      parts.push(
        `<div class="bubble gate-notice" data-reason="${esc(entry.deniedReason)}">` +
          `Not verified present (${esc(entry.deniedReason)})</div>`,
      );
    } else if (entry.error) {
      parts.push(`<div class="bubble chat-error">${esc(entry.error)}</div>`);
    }
    return `<div class="exchange">${parts.join("")}</div>`;
  });
  return blocks.join("");
}

export function renderStudentOptions(students: StudentOut[]): string {
  return students
    .map((s) => `<option value="${esc(s.student_id)}">${esc(s.display_name)}</option>`)
    .join("");
}

// -- quiz ------------------------------------------------------------------------

const OPTION_LABELS = ["A", "B", "C", "D"] as const;

export function renderQuizCards(data: QuizResponse): string {
  const cards = data.questions
    .map((q, i) => {
      const options = q.options
        .map(
          (opt, j) =>
            `<li data-option="${OPTION_LABELS[j]}"${j === q.correct ? ' data-correct="true"' : ""}>` +
            `${OPTION_LABELS[j]}) ${esc(opt)}</li>`,
        )
        .join("");
      const difficulty = q.difficulty ? `<span class="difficulty">${esc(q.difficulty)}</span>` : "";
      return (
        `<div class="quiz-card" data-question="${i + 1}">` +
        `<p class="stem">Q${i + 1}. ${esc(q.stem)}</p>${difficulty}` +
        `<ul class="options">${options}</ul>` +
        `<button class="reveal" data-answer="${OPTION_LABELS[q.correct]}">Reveal answer</button>` +
        `<span class="revealed-answer hidden">Answer: ${OPTION_LABELS[q.correct]}</span>` +
        `</div>`
      );
    })
    .join("");
  return `<div class="quiz" data-topic="${esc(data.topic)}" data-generator="${esc(data.generator_id)}">${cards}</div>`;
}

export function renderQuizEmptyNotice(topic: string): string {
  return `<div class="quiz-empty">No material matched the topic "${esc(topic)}".</div>`;
}

export function renderQuizValidation(message: string): string {
  return `<div class="quiz-invalid">${esc(message)}</div>`;
}

// -- environment --------------------------------------------------------------------

const ACTUATOR_ORDER = ["hvac_cooling", "lighting", "ventilation"] as const;

export function renderEnvironmentPanel(data: EnvironmentResponse, stale: boolean): string {
  const r = data.reading;
  const metrics = r
    ? `<dl class="metrics">` +
      `<div><dt>temperature</dt><dd>${esc(r.temp_c.toFixed(1))} &deg;C</dd></div>` +
      `<div><dt>humidity</dt><dd>${esc(r.humidity_pct.toFixed(0))} %</dd></div>` +
      `<div><dt>light</dt><dd>${esc(r.lux.toFixed(0))} lux</dd></div>` +
      `<div><dt>air quality</dt><dd>${esc(r.air_ppm.toFixed(0))} ppm</dd></div>` +
      `</dl>`
    : `<p class="no-data">no readings yet</p>`;
  const badges = ACTUATOR_ORDER.map((name) => {
    const on = data.actuators[name] === true;
    return (
      `<span class="badge actuator-${on ? "on" : "off"}" data-actuator="${name}" data-on="${on}">` +
      `${name.replace("_", " ")}: ${on ? "on" : "off"}</span>`
    );
  }).join(" ");
  const staleBadge = stale ? `<span class="badge stale" data-stale="true">stale data</span>` : "";
  return (
    `<div class="environment" data-room="${esc(data.room_id)}">` +
    `${metrics}<div class="actuators">${badges}${staleBadge}</div></div>`
  );
}
