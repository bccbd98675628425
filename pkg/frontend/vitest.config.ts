import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the acceptance spec boots the real service and drives the CLI
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
