import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the session parity test trains a small model twice
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
