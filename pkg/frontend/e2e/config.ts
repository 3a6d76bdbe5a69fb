/** Shared constants for the end-to-end suite. */

export const E2E_PORT = 8731;
export const E2E_BASE = `http://127.0.0.1:${E2E_PORT}`;
