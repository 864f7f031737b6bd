import type { ItemFeatures } from "./types.js";

/**
 * Deterministic SVG stand-in for items without thumbnails: one bar per
 * stored feature, hue keyed to the feature id, height to its value.
 * Visual slots fill the upper band, text slots the lower band.
 */
export function featureGlyph(features: ItemFeatures, size = 96): string {
  const bands: Array<{ slots: [number, number][]; y0: number; h: number }> = [
    { slots: features.visual, y0: 0, h: size * 0.62 },
    { slots: features.text, y0: size * 0.66, h: size * 0.34 },
  ];
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${size}" height="${size}" viewBox="0 0 ${size} ${size}">`,
    `<rect width="${size}" height="${size}" fill="#1d2229"/>`,
  ];
  for (const band of bands) {
    const n = Math.max(band.slots.length, 1);
    const w = size / n;
    band.slots.forEach(([fid, value], i) => {
      const hue = (fid * 137) % 360;
      const h = Math.max(1, band.h * Math.min(Math.max(value, 0), 1));
      const y = band.y0 + band.h - h;
      parts.push(
        `<rect x="${(i * w).toFixed(2)}" y="${y.toFixed(2)}" width="${(w * 0.9).toFixed(2)}"` +
          ` height="${h.toFixed(2)}" fill="hsl(${hue},62%,52%)"/>`,
      );
    });
  }
  parts.push("</svg>");
  return `data:image/svg+xml;utf8,${encodeURIComponent(parts.join(""))}`;
}
