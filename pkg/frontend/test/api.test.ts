import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { fixtures } from "./fixtures.js";

function fakeFetch(routes: Record<string, { status: number; body: unknown }>) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const route = routes[url.replace(/^https?:\/\/[^/]+/, "")];
    if (!route) return new Response("not found", { status: 404 });
    return new Response(JSON.stringify(route.body), {
      status: route.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("joins the configured base URL with API paths", async () => {
    const { impl, calls } = fakeFetch({ "/api/students": { status: 200, body: fixtures.students } });
    const client = new ApiClient("http://server:8000/", impl);
    const students = await client.students();
    expect(students).toHaveLength(2);
    expect(calls[0]!.url).toBe("http://server:8000/api/students");
  });

  it("posts chat requests as JSON", async () => {
    const { impl, calls } = fakeFetch({ "/api/chat": { status: 200, body: fixtures.chat_ok } });
    const client = new ApiClient("", impl);
    const answer = await client.chat({
      student_id: "s1",
      session_id: "sess",
      doc_id: "d1",
      text: "question",
    });
    expect(answer.generator_id).toBe(fixtures.chat_ok.generator_id);
    expect(calls[0]!.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]!.init?.body))).toMatchObject({ student_id: "s1" });
  });

  it("raises ApiError carrying status and body on 403", async () => {
    const { impl } = fakeFetch({
      "/api/chat": { status: 403, body: fixtures.chat_denied.body },
    });
    const client = new ApiClient("", impl);
    try {
      await client.chat({ student_id: "s2", session_id: "sess", doc_id: "d1", text: "hi" });
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      const apiError = err as ApiError;
      expect(apiError.status).toBe(403);
      expect((apiError.body as typeof fixtures.chat_denied.body).detail.reason).toBe(
        fixtures.chat_denied.body.detail.reason,
      );
    }
  });

  it("encodes path parameters", async () => {
    const { impl, calls } = fakeFetch({
      "/api/rooms/room%20one/environment": { status: 200, body: fixtures.environment_off },
    });
    const client = new ApiClient("", impl);
    await client.environment("room one");
    expect(calls[0]!.url).toContain("room%20one");
  });
});
