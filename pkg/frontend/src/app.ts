// Browser bootstrap: wires the four panels to the API with 1 s polling.
// All rendering goes through the pure functions in render.ts; this file only
// moves data and handles DOM events.

import { ApiClient, ApiError, type AttendanceResponse } from "./api.js";
import { StaleTracker, diffChangedStudents, startPolling } from "./poll.js";
import {
  renderAttendanceTable,
  renderChatTranscript,
  renderEnvironmentPanel,
  renderErrorBanner,
  renderQuizCards,
  renderQuizEmptyNotice,
  renderQuizValidation,
  renderSessionOptions,
  renderStudentOptions,
  type ChatEntry,
} from "./render.js";

const POLL_MS = 1000;

declare global {
  interface Window {
    SMARTCLASS_API_BASE?: string;
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const api = new ApiClient(window.SMARTCLASS_API_BASE ?? "");

  // -- attendance panel -------------------------------------------------
  const sessionSelect = el<HTMLSelectElement>("session-select");
  const attendanceBox = el<HTMLDivElement>("attendance-panel");
  let lastAttendance: AttendanceResponse | null = null;

  async function refreshSessions(): Promise<void> {
    try {
      const sessions = await api.sessions();
      const current = sessionSelect.value;
      sessionSelect.innerHTML = renderSessionOptions(sessions);
      if (current) sessionSelect.value = current;
    } catch {
      // session list is retried on the next poll; attendance shows the banner
    }
  }

  startPolling(async () => {
    if (!sessionSelect.value) await refreshSessions();
    if (!sessionSelect.value) return;
    try {
      const data = await api.attendance(sessionSelect.value);
      const changed = diffChangedStudents(lastAttendance, data);
      lastAttendance = data;
      attendanceBox.innerHTML = renderAttendanceTable(data, changed);
    } catch (err) {
      attendanceBox.innerHTML = renderErrorBanner(
        err instanceof ApiError ? `attendance request failed (${err.status})` : "server unreachable",
      );
    }
  }, POLL_MS);

  // -- environment panel --------------------------------------------------
  const roomSelect = el<HTMLSelectElement>("room-select");
  const environmentBox = el<HTMLDivElement>("environment-panel");
  const stale = new StaleTracker(5000);

  startPolling(async () => {
    try {
      if (!roomSelect.value) {
        const rooms = await api.rooms();
        const current = roomSelect.value;
        roomSelect.innerHTML = rooms.map((r) => `<option>${r}</option>`).join("");
        if (current) roomSelect.value = current;
      }
      if (!roomSelect.value) return;
      const data = await api.environment(roomSelect.value);
      stale.update(JSON.stringify(data.last_update_ms));
      environmentBox.innerHTML = renderEnvironmentPanel(data, stale.isStale());
    } catch (err) {
      environmentBox.innerHTML = renderErrorBanner(
        err instanceof ApiError ? `environment request failed (${err.status})` : "server unreachable",
      );
    }
  }, POLL_MS);

  // -- chat panel -------------------------------------------------------------
  const studentSelect = el<HTMLSelectElement>("student-select");
  const docSelect = el<HTMLSelectElement>("doc-select");
  const chatInput = el<HTMLInputElement>("chat-input");
  const chatSend = el<HTMLButtonElement>("chat-send");
  const transcriptBox = el<HTMLDivElement>("chat-transcript");
  const transcript: ChatEntry[] = [];

  void (async () => {
    try {
      studentSelect.innerHTML = renderStudentOptions(await api.students());
      docSelect.innerHTML = (await api.documents())
        .map((d) => `<option value="${d.doc_id}">${d.title || d.doc_id}</option>`)
        .join("");
    } catch {
      transcriptBox.innerHTML = renderErrorBanner("could not load students/documents");
    }
  })();

  chatInput.addEventListener("input", () => {
    chatSend.disabled = chatInput.value.trim() === "";
  });
  chatSend.disabled = true;

  chatSend.addEventListener("click", () => {
    void (async () => {
      const question = chatInput.value.trim();
      if (!question) return;
      const entry: ChatEntry = { question };
      transcript.push(entry);
      chatInput.value = "";
      chatSend.disabled = true;
      try {
        entry.answer = await api.chat({
          student_id: studentSelect.value,
          session_id: sessionSelect.value,
          doc_id: docSelect.value,
          text: question,
        });
      } catch (err) {
        if (err instanceof ApiError && err.status === 403) {
          const detail = (err.body as { detail?: { reason?: string } })?.detail;
          entry.deniedReason = detail?.reason ?? "denied";
        } else {
          entry.error = err instanceof ApiError ? `request failed (${err.status})` : "server unreachable";
        }
      }
      transcriptBox.innerHTML = renderChatTranscript(transcript);
      transcriptBox.scrollTop = transcriptBox.scrollHeight;
    })();
  });

  // -- quiz panel ---------------------------------------------------------------
  const quizTopic = el<HTMLInputElement>("quiz-topic");
  const quizCount = el<HTMLInputElement>("quiz-count");
  const quizSubmit = el<HTMLButtonElement>("quiz-submit");
  const quizBox = el<HTMLDivElement>("quiz-panel");

  quizSubmit.addEventListener("click", () => {
    void (async () => {
      const topic = quizTopic.value.trim();
      const n = Number(quizCount.value);
      if (!topic) {
        quizBox.innerHTML = renderQuizValidation("topic must not be empty");
        return;
      }
      if (!Number.isInteger(n) || n < 1) {
        quizBox.innerHTML = renderQuizValidation("question count must be a positive integer");
        return;
      }
      try {
        const quiz = await api.quiz({ doc_id: docSelect.value, topic, num_questions: n });
        quizBox.innerHTML = renderQuizCards(quiz);
        for (const button of quizBox.querySelectorAll<HTMLButtonElement>("button.reveal")) {
          button.addEventListener("click", () => {
            button.nextElementSibling?.classList.toggle("hidden");
          });
        }
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          const detail = (err.body as { detail?: { error?: string } })?.detail;
          quizBox.innerHTML =
            detail?.error === "no_context"
              ? renderQuizEmptyNotice(topic)
              : renderQuizValidation(JSON.stringify(err.body));
        } else {
          quizBox.innerHTML = renderErrorBanner(
            err instanceof ApiError ? `quiz request failed (${err.status})` : "server unreachable",
          );
        }
      }
    })();
  });
}

document.addEventListener("DOMContentLoaded", main);
