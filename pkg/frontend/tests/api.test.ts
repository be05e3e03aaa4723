import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  ApiError,
  FeedbackApi,
  canonicalCells,
  selectionBody,
} from "../src/api.js";

interface Captured {
  method: string;
  url: string;
  contentType: string | undefined;
  body: string;
}

let server: Server;
let api: FeedbackApi;
const captured: Captured[] = [];
// route -> [status, body] override for error-path tests
const responses = new Map<string, [number, string]>();

function handle(req: IncomingMessage, res: ServerResponse): void {
  const chunks: Buffer[] = [];
  req.on("data", (c: Buffer) => chunks.push(c));
  req.on("end", () => {
    captured.push({
      method: req.method ?? "",
      url: req.url ?? "",
      contentType: req.headers["content-type"],
      body: Buffer.concat(chunks).toString("utf8"),
    });
    const preset = responses.get(`${req.method} ${req.url}`);
    if (preset) {
      res.writeHead(preset[0], { "content-type": "application/json" });
      res.end(preset[1]);
      return;
    }
    res.writeHead(200, { "content-type": "application/json" });
    if (req.url === "/session") {
      res.end(JSON.stringify({
        session_id: "t-epoch1",
        epoch: 1,
        total_cases: 1,
        resolved_count: 0,
        pending_case_ids: ["s1"],
      }));
    } else if (req.method === "POST" && req.url?.endsWith("/skip")) {
      res.end(JSON.stringify({ sample_id: "s1", action: "skip", cells: null }));
    } else {
      res.end(JSON.stringify(
        { sample_id: "s1", action: "selection", cells: [1, 5] }));
    }
  });
}

beforeAll(async () => {
  server = createServer(handle);
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const port = (server.address() as AddressInfo).port;
  api = new FeedbackApi(`http://127.0.0.1:${port}`);
});

afterAll(async () => {
  await new Promise<void>((resolve, reject) =>
    server.close((err) => (err ? reject(err) : resolve())));
});

describe("selection body canonicalization", () => {
  it("sorts ascending and drops duplicates", () => {
    expect(canonicalCells([5, 5, 1])).toEqual([1, 5]);
    expect(canonicalCells([10, 2, 10, 0])).toEqual([0, 2, 10]);
    expect(canonicalCells([])).toEqual([]);
  });

  it("serializes to the exact replayable bytes", () => {
    expect(selectionBody([5])).toBe('{"cells":[5]}');
    expect(selectionBody([6, 5])).toBe('{"cells":[5,6]}');
    expect(selectionBody([3, 1, 3, 2])).toBe('{"cells":[1,2,3]}');
  });
});

describe("FeedbackApi", () => {
  it("sends the canonical body on the selection route", async () => {
    captured.length = 0;
    const ack = await api.submitSelection("s1", new Set([5, 1]));
    expect(ack.action).toBe("selection");
    expect(captured).toHaveLength(1);
    expect(captured[0].method).toBe("POST");
    expect(captured[0].url).toBe("/cases/s1/selection");
    expect(captured[0].contentType).toContain("application/json");
    expect(captured[0].body).toBe('{"cells":[1,5]}');
  });

  it("escapes awkward sample ids in paths", async () => {
    captured.length = 0;
    await api.caseDetail("a b/c");
    expect(captured[0].url).toBe("/cases/a%20b%2Fc");
  });

  it("skips with an empty body", async () => {
    captured.length = 0;
    const ack = await api.skip("s1");
    expect(ack.action).toBe("skip");
    expect(captured[0].url).toBe("/cases/s1/skip");
    expect(captured[0].body).toBe("");
  });

  it("maps domain error envelopes to typed errors", async () => {
    responses.set("POST /cases/s1/selection", [409, JSON.stringify(
      { code: "already_resolved", message: "case 's1' already resolved" })]);
    try {
      const err = await api.submitSelection("s1", [1]).catch((e) => e);
      expect(err).toBeInstanceOf(ApiError);
      expect(err.status).toBe(409);
      expect(err.code).toBe("already_resolved");
      expect(err.message).toContain("already resolved");
    } finally {
      responses.clear();
    }
  });

  it("maps schema-violation envelopes too", async () => {
    responses.set("POST /cases/s1/selection", [422, JSON.stringify(
      { detail: [{ loc: ["body", "cells"], msg: "Field required" }] })]);
    try {
      const err = await api.submitSelection("s1", [1]).catch((e) => e);
      expect(err).toBeInstanceOf(ApiError);
      expect(err.status).toBe(422);
      expect(err.code).toBe("invalid_request");
    } finally {
      responses.clear();
    }
  });

  it("rejects with a non-ApiError when the server is unreachable", async () => {
    const dead = new FeedbackApi("http://127.0.0.1:1");
    const err = await dead.session().catch((e) => e);
    expect(err).toBeInstanceOf(Error);
    expect(err).not.toBeInstanceOf(ApiError);
  });

  it("trims trailing slashes from the base url", () => {
    expect(new FeedbackApi("http://x:1//").baseUrl).toBe("http://x:1");
  });
});
