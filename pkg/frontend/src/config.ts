/**
 * Build-time settings. `make-config.mjs` rewrites the marked line from the
 * MINIORC_BASE_URL environment variable when the bundle is built; the
 * default targets a gateway on the same origin.
 */

export const BASE_URL: string = ""; // @base-url
