import type { RoomMeta, TileInfo } from "./api.js";

/**
 * The slice of CanvasRenderingContext2D the renderer touches, so tests
 * can hand in a recording stub.
 */
export interface GridContext {
  fillStyle: string;
  font: string;
  textAlign: string;
  textBaseline: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const cssColor = (rgb: [number, number, number]): string =>
  `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;

/** Stable translucent tint for room index i (golden-angle hues). */
export const roomTint = (i: number): string =>
  `hsla(${Math.round((i * 137.508) % 360)},70%,55%,0.45)`;

export const drawGrid = (
  ctx: GridContext,
  grid: number[][],
  palette: TileInfo[],
  cellSize: number,
): void => {
  for (let row = 0; row < grid.length; row++) {
    for (let col = 0; col < grid[row].length; col++) {
      const tile = palette[grid[row][col]];
      ctx.fillStyle = tile ? cssColor(tile.color) : "#ff00ff";
      ctx.fillRect(col * cellSize, row * cellSize, cellSize, cellSize);
    }
  }
};

/** Room tints plus a direction label at each room's center of mass. */
export const drawOverlay = (
  ctx: GridContext,
  rooms: RoomMeta[],
  cellSize: number,
): void => {
  rooms.forEach((room, i) => {
    ctx.fillStyle = roomTint(i);
    for (const [row, col] of room.cells) {
      ctx.fillRect(col * cellSize, row * cellSize, cellSize, cellSize);
    }
  });
  ctx.font = `bold ${Math.max(10, cellSize)}px sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  rooms.forEach((room) => {
    let rowSum = 0;
    let colSum = 0;
    for (const [row, col] of room.cells) {
      rowSum += row;
      colSum += col;
    }
    const n = room.cells.length || 1;
    ctx.fillStyle = "#ffffff";
    ctx.fillText(
      room.direction,
      ((colSum / n) + 0.5) * cellSize,
      ((rowSum / n) + 0.5) * cellSize,
    );
  });
};

export type TileHit = { row: number; col: number; id: number };

/** Map canvas-local pixel coordinates to the tile underneath, if any. */
export const tileAt = (
  grid: number[][],
  cellSize: number,
  x: number,
  y: number,
): TileHit | null => {
  const col = Math.floor(x / cellSize);
  const row = Math.floor(y / cellSize);
  if (row < 0 || row >= grid.length) return null;
  if (col < 0 || col >= grid[row].length) return null;
  return { row, col, id: grid[row][col] };
};
