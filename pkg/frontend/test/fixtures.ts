// Recorded responses from the smartclass HTTP API (captured against the
// real server; see tools/record_fixtures note in the README). Tests render
// panels from these verbatim.

export const fixtures = {
  "attendance_after": {
    "results": [
      {
        "display_name": "Ada Lovelace",
        "evidence": [
          1,
          2
        ],
        "reason": "ok",
        "status": "present",
        "student_id": "s1"
      },
      {
        "display_name": "Grace Hopper",
        "evidence": null,
        "reason": "duplicate_tag_use",
        "status": "flagged",
        "student_id": "s2"
      }
    ],
    "session_id": "be828c80f9b64c178485bc6d24f4df9b",
    "state": "open"
  },
  "attendance_before": {
    "results": [
      {
        "display_name": "Ada Lovelace",
        "evidence": null,
        "reason": "no_rfid",
        "status": "absent",
        "student_id": "s1"
      },
      {
        "display_name": "Grace Hopper",
        "evidence": null,
        "reason": "no_rfid",
        "status": "absent",
        "student_id": "s2"
      }
    ],
    "session_id": "be828c80f9b64c178485bc6d24f4df9b",
    "state": "open"
  },
  "chat_denied": {
    "body": {
      "detail": {
        "error": "access_denied",
        "reason": "duplicate_tag_use",
        "status": "flagged"
      }
    },
    "status": 403
  },
  "chat_ok": {
    "answer": "Based on the course material: Edge nodes filter telemetry before uplink. [1]",
    "citations": [
      0
    ],
    "generator_id": "extractive-stub",
    "seq": 9
  },
  "environment_off": {
    "actuators": {
      "hvac_cooling": false,
      "lighting": false,
      "ventilation": false
    },
    "last_update_ms": 0,
    "reading": {
      "air_ppm": 146.5201465201465,
      "humidity_pct": 45.0,
      "lux": 4395.604395604396,
      "temp_c": 22.0,
      "timestamp": 0
    },
    "room_id": "101",
    "toggles": {
      "hvac_cooling": 0,
      "lighting": 0,
      "ventilation": 0
    }
  },
  "environment_on": {
    "actuators": {
      "hvac_cooling": true,
      "lighting": false,
      "ventilation": false
    },
    "last_update_ms": 5000,
    "reading": {
      "air_ppm": 146.5201465201465,
      "humidity_pct": 45.0,
      "lux": 4395.604395604396,
      "temp_c": 27.5,
      "timestamp": 5000
    },
    "room_id": "101",
    "toggles": {
      "hvac_cooling": 1,
      "lighting": 0,
      "ventilation": 0
    }
  },
  "quiz_five": {
    "doc_id": "d1",
    "generator_id": "cloze-stub",
    "num_questions": 5,
    "questions": [
      {
        "correct": 3,
        "difficulty": "basic",
        "options": [
          "Verification",
          "automatically",
          "transmissions",
          "telemetry"
        ],
        "source_chunk": 0,
        "stem": "Edge nodes filter ____ before uplink."
      },
      {
        "correct": 0,
        "difficulty": "advanced",
        "options": [
          "readings",
          "transmissions",
          "Verification",
          "automatically"
        ],
        "source_chunk": 0,
        "stem": "The gateway batches sensor ____ into frames."
      },
      {
        "correct": 3,
        "difficulty": "basic",
        "options": [
          "automatically",
          "Verification",
          "transmissions",
          "checksum"
        ],
        "source_chunk": 0,
        "stem": "Every frame carries a ____ field."
      },
      {
        "correct": 1,
        "difficulty": "intermediate",
        "options": [
          "automatically",
          "transmissions",
          "credentials",
          "Verification"
        ],
        "source_chunk": 0,
        "stem": "Devices retry failed ____ automatically."
      },
      {
        "correct": 2,
        "difficulty": "intermediate",
        "options": [
          "Verification",
          "transmissions",
          "intervals",
          "automatically"
        ],
        "source_chunk": 0,
        "stem": "Backoff ____ double after every failure."
      }
    ],
    "seq": 10,
    "topic": "attendance pairing"
  },
  "quiz_no_context": {
    "body": {
      "detail": {
        "error": "no_context",
        "message": "topic '...' retrieved nothing above score 0"
      }
    },
    "status": 422
  },
  "sessions": [
    {
      "class_id": "c1",
      "network_id": "campus-wifi",
      "pairing_window_ms": 300000,
      "room_id": "101",
      "seq": null,
      "session_id": "be828c80f9b64c178485bc6d24f4df9b",
      "state": "open",
      "window_end": 3600000,
      "window_start": 0
    }
  ],
  "students": [
    {
      "display_name": "Ada Lovelace",
      "mac": "aa:bb:cc:dd:ee:01",
      "seq": null,
      "student_id": "s1",
      "tag_uid": "04a3b2c1"
    },
    {
      "display_name": "Grace Hopper",
      "mac": "aa:bb:cc:dd:ee:02",
      "seq": null,
      "student_id": "s2",
      "tag_uid": "05b4c3d2"
    }
  ]
} as const;
