/** Grayscale frame operations: aspect-preserving resize. */

export interface GrayFrame {
  width: number;
  height: number;
  /** row-major luma, length width*height */
  pixels: Uint8Array;
}

/**
 * Bilinear resize to a target width, preserving aspect ratio.
 * Returns the input unchanged when the width already matches.
 */
export function resizeToWidth(frame: GrayFrame, targetWidth: number): GrayFrame {
  if (targetWidth === frame.width) {
    return frame;
  }
  const scale = targetWidth / frame.width;
  const targetHeight = Math.max(1, Math.round(frame.height * scale));
  const out = new Uint8Array(targetWidth * targetHeight);
  const xRatio = frame.width / targetWidth;
  const yRatio = frame.height / targetHeight;
  for (let y = 0; y < targetHeight; y++) {
    const sy = Math.min((y + 0.5) * yRatio - 0.5, frame.height - 1);
    const y0 = Math.max(0, Math.floor(sy));
    const y1 = Math.min(frame.height - 1, y0 + 1);
    const fy = sy - y0;
    for (let x = 0; x < targetWidth; x++) {
      const sx = Math.min((x + 0.5) * xRatio - 0.5, frame.width - 1);
      const x0 = Math.max(0, Math.floor(sx));
      const x1 = Math.min(frame.width - 1, x0 + 1);
      const fx = sx - x0;
      const top = frame.pixels[y0 * frame.width + x0] * (1 - fx)
        + frame.pixels[y0 * frame.width + x1] * fx;
      const bottom = frame.pixels[y1 * frame.width + x0] * (1 - fx)
        + frame.pixels[y1 * frame.width + x1] * fx;
      out[y * targetWidth + x] = Math.round(top * (1 - fy) + bottom * fy);
    }
  }
  return { width: targetWidth, height: targetHeight, pixels: out };
}
