/**
 * Raw depth payload: one JSON header line, then little-endian float32 data.
 * Background pixels carry +Infinity, which is why the transfer avoids PNG.
 */

export interface DepthMap {
  rows: number;
  cols: number;
  data: Float32Array;
}

export function decodeFloatPayload(payload: ArrayBuffer): DepthMap {
  const bytes = new Uint8Array(payload);
  let newline = -1;
  for (let i = 0; i < bytes.length; i++) {
    if (bytes[i] === 0x0a) {
      newline = i;
      break;
    }
  }
  if (newline < 0) {
    throw new Error("missing header line in depth payload");
  }
  const header = JSON.parse(new TextDecoder().decode(bytes.subarray(0, newline)));
  if (header.dtype !== "float32") {
    throw new Error(`unsupported dtype ${header.dtype}`);
  }
  const [rows, cols] = header.shape as [number, number];
  const body = payload.slice(newline + 1);
  const data = new Float32Array(body, 0, rows * cols);
  return { rows, cols, data };
}

export function depthAt(map: DepthMap, row: number, col: number): number {
  if (row < 0 || row >= map.rows || col < 0 || col >= map.cols) {
    return Infinity;
  }
  return map.data[row * map.cols + col];
}

/** A pixel is a valid pick target only on solid geometry. */
export function isForeground(map: DepthMap, row: number, col: number): boolean {
  return Number.isFinite(depthAt(map, row, col));
}
