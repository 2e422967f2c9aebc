// Panel renderers against recorded API fixtures. The core invariant: the
// dashboard displays only status strings that came back from the API.

import { describe, expect, it } from "vitest";

import type { AttendanceResponse, ChatResponse, EnvironmentResponse, QuizResponse } from "../src/api.js";
import {
  esc,
  renderAttendanceTable,
  renderChatTranscript,
  renderEnvironmentPanel,
  renderErrorBanner,
  renderQuizCards,
  renderQuizEmptyNotice,
  renderSessionOptions,
  renderStudentOptions,
} from "../src/render.js";
import { fixtures } from "./fixtures.js";

const attendanceBefore = fixtures.attendance_before as unknown as AttendanceResponse;
const attendanceAfter = fixtures.attendance_after as unknown as AttendanceResponse;
const chatOk = fixtures.chat_ok as unknown as ChatResponse;
const quizFive = fixtures.quiz_five as unknown as QuizResponse;
const environmentOff = fixtures.environment_off as unknown as EnvironmentResponse;
const environmentOn = fixtures.environment_on as unknown as EnvironmentResponse;

function dataValues(html: string, attr: string): string[] {
  return [...html.matchAll(new RegExp(`data-${attr}="([^"]*)"`, "g"))].map((m) => m[1]!);
}

describe("attendance table", () => {
  it("renders every row with the API's status and reason strings", () => {
    const html = renderAttendanceTable(attendanceBefore);
    for (const row of attendanceBefore.results) {
      expect(html).toContain(`data-status="${row.status}"`);
      expect(html).toContain(`data-reason="${row.reason}"`);
      expect(html).toContain(esc(row.display_name));
    }
  });

  it("flips to present after the dual-auth fixture", () => {
    const before = renderAttendanceTable(attendanceBefore);
    const after = renderAttendanceTable(attendanceAfter, new Set(["s1"]));
    expect(dataValues(before, "status")).toEqual(["absent", "absent"]);
    expect(dataValues(after, "status")).toEqual(["present", "flagged"]);
    expect(after).toContain('class="row-changed"');
    expect(after).toContain("#1 / #2"); // evidence seqs from the API
  });

  it("shows the fraud flag with its API reason", () => {
    const html = renderAttendanceTable(attendanceAfter);
    expect(html).toContain('data-status="flagged"');
    expect(html).toContain('data-reason="duplicate_tag_use"');
  });

  it("invents no status strings: all displayed statuses exist in the fixture", () => {
    const fixtureStatuses = new Set(attendanceAfter.results.map((r) => r.status));
    const fixtureReasons = new Set(attendanceAfter.results.map((r) => r.reason));
    const html = renderAttendanceTable(attendanceAfter);
    for (const status of dataValues(html, "status")) expect(fixtureStatuses).toContain(status);
    for (const reason of dataValues(html, "reason")) expect(fixtureReasons).toContain(reason);
  });

  it("renders an error banner, never a blank panel", () => {
    const html = renderErrorBanner("server unreachable");
    expect(html).toContain("error-banner");
    expect(html).toContain("server unreachable");
  });

  it("escapes hostile display names", () => {
    const hostile: AttendanceResponse = {
      ...attendanceBefore,
      results: [{ ...attendanceBefore.results[0]!, display_name: '<img src=x onerror="1">' }],
    };
    const html = renderAttendanceTable(hostile);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });
});

describe("chat transcript", () => {
  it("renders the answer bubble with citation markers", () => {
    const html = renderChatTranscript([{ question: "what filters telemetry?", answer: chatOk }]);
    expect(html).toContain(esc(chatOk.answer));
    for (const c of chatOk.citations) {
      expect(html).toContain(`data-chunk="${c}"`);
    }
    expect(html).toContain(`data-generator="${chatOk.generator_id}"`);
  });

  it("renders the gate notice with the API's denial reason", () => {
    const denied = fixtures.chat_denied;
    expect(denied.status).toBe(403);
    const reason = denied.body.detail.reason;
    const html = renderChatTranscript([{ question: "hello?", deniedReason: reason }]);
    expect(html).toContain("Not verified present");
    expect(html).toContain(`data-reason="${reason}"`);
  });

  it("renders transport errors inline", () => {
    const html = renderChatTranscript([{ question: "q", error: "server unreachable" }]);
    expect(html).toContain("chat-error");
  });
});

describe("quiz cards", () => {
  it("renders five cards from the fixture", () => {
    const html = renderQuizCards(quizFive);
    expect(quizFive.questions).toHaveLength(5);
    expect([...html.matchAll(/class="quiz-card"/g)]).toHaveLength(5);
    for (const q of quizFive.questions) {
      expect(html).toContain(esc(q.stem));
      for (const opt of q.options) expect(html).toContain(esc(opt));
    }
  });

  it("marks exactly one correct option per card and hides the reveal", () => {
    const html = renderQuizCards(quizFive);
    expect([...html.matchAll(/data-correct="true"/g)]).toHaveLength(5);
    expect([...html.matchAll(/revealed-answer hidden/g)]).toHaveLength(5);
    expect([...html.matchAll(/<button class="reveal"/g)]).toHaveLength(5);
  });

  it("renders the empty-result notice for a no-context topic", () => {
    expect(fixtures.quiz_no_context.status).toBe(422);
    expect(fixtures.quiz_no_context.body.detail.error).toBe("no_context");
    const html = renderQuizEmptyNotice("...");
    expect(html).toContain("No material matched");
  });
});

describe("environment panel", () => {
  it("shows four metrics with units and three actuator badges", () => {
    const html = renderEnvironmentPanel(environmentOff, false);
    expect(html).toContain("22.0");
    expect(html).toContain("&deg;C");
    expect(html).toContain("lux");
    expect(html).toContain("ppm");
    expect(dataValues(html, "actuator")).toEqual(["hvac_cooling", "lighting", "ventilation"]);
  });

  it("flips the hvac badge between the two fixtures", () => {
    const off = renderEnvironmentPanel(environmentOff, false);
    const on = renderEnvironmentPanel(environmentOn, false);
    expect(environmentOff.actuators["hvac_cooling"]).toBe(false);
    expect(environmentOn.actuators["hvac_cooling"]).toBe(true);
    expect(off).toContain('data-actuator="hvac_cooling" data-on="false"');
    expect(on).toContain('data-actuator="hvac_cooling" data-on="true"');
  });

  it("badge state mirrors the API booleans exactly", () => {
    for (const fixture of [environmentOff, environmentOn]) {
      const html = renderEnvironmentPanel(fixture, false);
      for (const name of ["hvac_cooling", "lighting", "ventilation"] as const) {
        expect(html).toContain(`data-actuator="${name}" data-on="${fixture.actuators[name]}"`);
      }
    }
  });

  it("shows the stale badge only when flagged", () => {
    expect(renderEnvironmentPanel(environmentOn, true)).toContain('data-stale="true"');
    expect(renderEnvironmentPanel(environmentOn, false)).not.toContain('data-stale="true"');
  });
});

describe("selectors", () => {
  it("renders student and session dropdowns from fixtures", () => {
    const students = renderStudentOptions([...fixtures.students]);
    expect(students).toContain("Ada Lovelace");
    expect(students).toContain('value="s1"');
    const sessions = renderSessionOptions([...fixtures.sessions] as never);
    expect(sessions).toContain("c1 (open)");
  });
});
