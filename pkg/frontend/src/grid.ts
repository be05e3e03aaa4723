/**
 * Grid geometry for the selection overlay.
 *
 * Mirrors the server's tiling exactly: cells are floor(size / count) pixels
 * per axis, the last row/column absorbs the remainder, and cells are numbered
 * row-major from 0 at the top-left. Bounds are half-open pixel rectangles.
 */

export interface GridGeometry {
  rows: number;
  cols: number;
  imageHeight: number;
  imageWidth: number;
}

/** [row0, col0, row1, col1], half-open. */
export type Rect = [number, number, number, number];

export function nCells(g: GridGeometry): number {
  return g.rows * g.cols;
}

function checkGeometry(g: GridGeometry): void {
  if (g.rows < 1 || g.cols < 1) {
    throw new RangeError(`grid must be at least 1x1, got ${g.rows}x${g.cols}`);
  }
  if (g.imageHeight < g.rows || g.imageWidth < g.cols) {
    throw new RangeError(
      `image ${g.imageHeight}x${g.imageWidth} too small for ` +
      `${g.rows}x${g.cols} grid`);
  }
}

export function cellBounds(g: GridGeometry, cell: number): Rect {
  checkGeometry(g);
  if (!Number.isInteger(cell) || cell < 0 || cell >= nCells(g)) {
    throw new RangeError(`cell ${cell} out of range [0, ${nCells(g)})`);
  }
  const r = Math.floor(cell / g.cols);
  const c = cell % g.cols;
  const ch = Math.floor(g.imageHeight / g.rows);
  const cw = Math.floor(g.imageWidth / g.cols);
  const row0 = r * ch;
  const col0 = c * cw;
  const row1 = r === g.rows - 1 ? g.imageHeight : (r + 1) * ch;
  const col1 = c === g.cols - 1 ? g.imageWidth : (c + 1) * cw;
  return [row0, col0, row1, col1];
}

/**
 * Cell index containing the image pixel (row, col).
 *
 * Inverse of cellBounds: plain floor division, clamped so the remainder
 * pixels past the equal-cell region land in the last row/column.
 */
export function cellIndexAt(g: GridGeometry, row: number, col: number): number {
  checkGeometry(g);
  if (row < 0 || row >= g.imageHeight || col < 0 || col >= g.imageWidth) {
    throw new RangeError(
      `pixel (${row}, ${col}) outside image ` +
      `${g.imageHeight}x${g.imageWidth}`);
  }
  const ch = Math.floor(g.imageHeight / g.rows);
  const cw = Math.floor(g.imageWidth / g.cols);
  const r = Math.min(Math.floor(row / ch), g.rows - 1);
  const c = Math.min(Math.floor(col / cw), g.cols - 1);
  return r * g.cols + c;
}

/** Center pixel of a cell, for hit-testing and tests. */
export function cellCenter(g: GridGeometry, cell: number): [number, number] {
  const [row0, col0, row1, col1] = cellBounds(g, cell);
  return [
    Math.floor((row0 + row1) / 2),
    Math.floor((col0 + col1) / 2),
  ];
}

/**
 * Cell bounds as percentages of the image, for CSS positioning of overlay
 * elements. Rendering in percent keeps the drawn borders aligned with the
 * pixel tiling at any display scale.
 */
export function cellRectPercent(
  g: GridGeometry, cell: number,
): { top: number; left: number; height: number; width: number } {
  const [row0, col0, row1, col1] = cellBounds(g, cell);
  return {
    top: (100 * row0) / g.imageHeight,
    left: (100 * col0) / g.imageWidth,
    height: (100 * (row1 - row0)) / g.imageHeight,
    width: (100 * (col1 - col0)) / g.imageWidth,
  };
}
