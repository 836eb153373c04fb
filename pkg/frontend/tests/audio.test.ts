import { describe, expect, it } from "vitest";

import { pcmDurationSec, pcmToWav } from "../src/audio";

function ascii(view: DataView, offset: number, length: number): string {
  let out = "";
  for (let i = 0; i < length; i++) {
    out += String.fromCharCode(view.getUint8(offset + i));
  }
  return out;
}

describe("pcmToWav", () => {
  it("writes the canonical 44-byte header, field by field", () => {
    const pcm = new Uint8Array([1, 2, 3, 4]).buffer;
    const wav = pcmToWav(pcm, 8000, 1);
    const view = new DataView(wav);

    expect(wav.byteLength).toBe(44 + 4);
    expect(ascii(view, 0, 4)).toBe("RIFF");
    expect(view.getUint32(4, true)).toBe(36 + 4);
    expect(ascii(view, 8, 4)).toBe("WAVE");
    expect(ascii(view, 12, 4)).toBe("fmt ");
    expect(view.getUint32(16, true)).toBe(16);
    expect(view.getUint16(20, true)).toBe(1); // integer PCM
    expect(view.getUint16(22, true)).toBe(1); // channels
    expect(view.getUint32(24, true)).toBe(8000);
    expect(view.getUint32(28, true)).toBe(16000); // byte rate
    expect(view.getUint16(32, true)).toBe(2); // block align
    expect(view.getUint16(34, true)).toBe(16); // bits per sample
    expect(ascii(view, 36, 4)).toBe("data");
    expect(view.getUint32(40, true)).toBe(4);
  });

  it("passes the payload through untouched", () => {
    const pcm = new Uint8Array(256).map((_, i) => i ^ 0x5a).buffer;
    const wav = pcmToWav(pcm, 16000, 2);
    expect(new Uint8Array(wav, 44)).toEqual(new Uint8Array(pcm));
  });

  it("scales header fields with the audio parameters", () => {
    const view = new DataView(pcmToWav(new ArrayBuffer(0), 44100, 2));
    expect(view.getUint16(22, true)).toBe(2);
    expect(view.getUint32(24, true)).toBe(44100);
    expect(view.getUint32(28, true)).toBe(44100 * 4);
    expect(view.getUint16(32, true)).toBe(4);
  });

  it("rejects nonsense parameters", () => {
    expect(() => pcmToWav(new ArrayBuffer(0), 0, 1)).toThrow("sample rate");
    expect(() => pcmToWav(new ArrayBuffer(0), 8000.5, 1)).toThrow("sample rate");
    expect(() => pcmToWav(new ArrayBuffer(0), 8000, 0)).toThrow("channel");
  });
});

describe("pcmDurationSec", () => {
  it("inverts the byte-rate arithmetic", () => {
    expect(pcmDurationSec(16000, 8000, 1)).toBe(1);
    expect(pcmDurationSec(8000, 8000, 1)).toBe(0.5);
    expect(pcmDurationSec(44100 * 4 * 3, 44100, 2)).toBe(3);
    expect(pcmDurationSec(0, 8000, 1)).toBe(0);
  });
});
