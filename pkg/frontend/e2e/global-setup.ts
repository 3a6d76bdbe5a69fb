/** Boots a real seeded service for the e2e suite.
 *
 * Synthesizes a tiny 3-type dataset and trains a small checkpoint through
 * the Python CLI (deterministic seeds), then launches `serve` and waits
 * for /v1/health. Artifacts are cached under `.e2e/` between runs.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { existsSync, mkdirSync, rmSync } from "node:fs";
import { dirname, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { E2E_BASE, E2E_PORT } from "./config";

const HERE = dirname(fileURLToPath(import.meta.url));
const REPO_ROOT = resolve(HERE, "..", "..");
const FIXTURE_DIR = resolve(HERE, "..", ".e2e");
const DATA_DIR = resolve(FIXTURE_DIR, "ds");
const CKPT = resolve(FIXTURE_DIR, "model.ckpt");

let server: ChildProcess | null = null;

function run(args: string[]) {
  const proc = spawnSync("python3", ["-m", "outfitgen.cli", ...args], {
    cwd: REPO_ROOT,
    encoding: "utf-8",
  });
  if (proc.status !== 0) {
    throw new Error(`outfitgen ${args[0]} failed:\n${proc.stdout}\n${proc.stderr}`);
  }
}

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${E2E_BASE}/v1/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`service did not become healthy at ${E2E_BASE}`);
}

export async function setup(): Promise<void> {
  if (!existsSync(CKPT)) {
    rmSync(FIXTURE_DIR, { recursive: true, force: true });
    mkdirSync(FIXTURE_DIR, { recursive: true });
    run([
      "data", "synth", "--out", DATA_DIR, "--themes", "3",
      "--items-per-theme", "10", "--types", "tops,bottoms,shoes",
      "--outfit-len", "3", "--outfits", "40", "--resolution", "16", "--seed", "5",
    ]);
    run([
      "train", "--data", DATA_DIR, "--out", CKPT, "--epochs", "2",
      "--lr", "3e-3", "--batch-size", "16", "--feature-dim", "16",
      "--embed-dim", "16", "--resolution", "16", "--seed", "0",
    ]);
  }
  server = spawn(
    "python3",
    ["-m", "outfitgen.cli", "serve", "--ckpt", CKPT, "--data", DATA_DIR,
     "--addr", `127.0.0.1:${E2E_PORT}`, "--split", "test"],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  await waitForHealth();
}

export async function teardown(): Promise<void> {
  if (server && !server.killed) {
    server.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 300));
    if (server.exitCode === null) server.kill("SIGKILL");
  }
}
