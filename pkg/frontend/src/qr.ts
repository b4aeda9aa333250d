// QR rendering of tunnel config text. The payload is the config text
// verbatim: standard clients import directly from the scanned code.

import QRCode from "qrcode";

export interface QrMatrix {
  size: number;
  /** row-major module flags, true = dark */
  modules: boolean[];
}

export function qrMatrix(text: string): QrMatrix {
  const code = QRCode.create(text, { errorCorrectionLevel: "M" });
  const size = code.modules.size;
  const modules: boolean[] = [];
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      modules.push(!!code.modules.get(y, x));
    }
  }
  return { size, modules };
}

/** SVG string for inline display; one rect per dark module plus quiet zone. */
export function qrSvg(text: string, moduleSize = 4, margin = 4): string {
  const { size, modules } = qrMatrix(text);
  const dim = (size + 2 * margin) * moduleSize;
  const rects: string[] = [];
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      if (modules[y * size + x]) {
        const px = (x + margin) * moduleSize;
        const py = (y + margin) * moduleSize;
        rects.push(
          `<rect x="${px}" y="${py}" width="${moduleSize}" height="${moduleSize}"/>`,
        );
      }
    }
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${dim} ${dim}" ` +
    `width="${dim}" height="${dim}" role="img" aria-label="device config QR">` +
    `<rect width="${dim}" height="${dim}" fill="#fff"/>` +
    `<g fill="#000">${rects.join("")}</g></svg>`
  );
}

/** Rasterize to RGBA pixels (for decoders; the page itself uses the SVG). */
export function qrPixels(matrix: QrMatrix, moduleSize = 4, margin = 4) {
  const dim = (matrix.size + 2 * margin) * moduleSize;
  const data = new Uint8ClampedArray(dim * dim * 4).fill(255);
  for (let y = 0; y < matrix.size; y++) {
    for (let x = 0; x < matrix.size; x++) {
      if (!matrix.modules[y * matrix.size + x]) continue;
      for (let dy = 0; dy < moduleSize; dy++) {
        for (let dx = 0; dx < moduleSize; dx++) {
          const px = (x + margin) * moduleSize + dx;
          const py = (y + margin) * moduleSize + dy;
          const i = (py * dim + px) * 4;
          data[i] = data[i + 1] = data[i + 2] = 0;
        }
      }
    }
  }
  return { data, width: dim, height: dim };
}
