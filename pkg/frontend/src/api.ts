// Typed client for the smartclass HTTP API. The dashboard performs no
// computation that changes any status: everything rendered comes out of
// these response payloads.

export interface StudentOut {
  student_id: string;
  display_name: string;
  tag_uid: string;
  mac: string;
}

export interface SessionOut {
  session_id: string;
  class_id: string;
  state: "open" | "closed";
  window_start: number;
  window_end: number;
  pairing_window_ms: number;
  network_id: string;
  room_id: string;
}

export interface AttendanceRow {
  student_id: string;
  display_name: string;
  status: string; // "present" | "absent" | "flagged" -- rendered verbatim
  reason: string;
  evidence: [number, number] | null;
}

export interface AttendanceResponse {
  session_id: string;
  state: string;
  results: AttendanceRow[];
}

export interface ChatResponse {
  answer: string;
  citations: number[];
  generator_id: string;
  seq: number;
}

export interface QuizQuestion {
  stem: string;
  options: [string, string, string, string];
  correct: number;
  source_chunk: number | null;
  difficulty: string | null;
}

export interface QuizResponse {
  doc_id: string;
  topic: string;
  num_questions: number;
  generator_id: string;
  questions: QuizQuestion[];
  seq: number;
}

export interface ReadingOut {
  temp_c: number;
  humidity_pct: number;
  lux: number;
  air_ppm: number;
  timestamp: number;
}

export interface EnvironmentResponse {
  room_id: string;
  reading: ReadingOut | null;
  actuators: Record<string, boolean>;
  toggles: Record<string, number>;
  last_update_ms: number | null;
}

export interface DocumentOut {
  doc_id: string;
  title: string;
  version: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`API error ${status}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.baseUrl.replace(/\/$/, "") + path, init);
    let payload: unknown = null;
    try {
      payload = await resp.json();
    } catch {
      payload = null;
    }
    if (!resp.ok) throw new ApiError(resp.status, payload);
    return payload as T;
  }

  students(): Promise<StudentOut[]> {
    return this.request("GET", "/api/students");
  }

  sessions(): Promise<SessionOut[]> {
    return this.request("GET", "/api/sessions");
  }

  attendance(sessionId: string): Promise<AttendanceResponse> {
    return this.request("GET", `/api/sessions/${encodeURIComponent(sessionId)}/attendance`);
  }

  documents(): Promise<DocumentOut[]> {
    return this.request("GET", "/api/documents");
  }

  chat(req: {
    student_id: string;
    session_id: string;
    doc_id: string;
    text: string;
    k?: number;
  }): Promise<ChatResponse> {
    return this.request("POST", "/api/chat", req);
  }

  quiz(req: { doc_id: string; topic: string; num_questions?: number }): Promise<QuizResponse> {
    return this.request("POST", "/api/quiz", req);
  }

  rooms(): Promise<string[]> {
    return this.request("GET", "/api/rooms");
  }

  environment(roomId: string): Promise<EnvironmentResponse> {
    return this.request("GET", `/api/rooms/${encodeURIComponent(roomId)}/environment`);
  }
}
