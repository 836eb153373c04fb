// Clip playback support. The backend serves headerless 16-bit PCM byte
// ranges; browsers cannot decode that directly, so the client prepends a
// standard RIFF/WAVE header before handing the bytes to an <audio> element.

const HEADER_BYTES = 44;
const BITS_PER_SAMPLE = 16;

/** Wrap raw little-endian 16-bit PCM in a canonical 44-byte WAV header. */
export function pcmToWav(
  pcm: ArrayBuffer,
  sampleRateHz: number,
  channels: number
): ArrayBuffer {
  if (!Number.isInteger(sampleRateHz) || sampleRateHz <= 0) {
    throw new Error(`invalid sample rate ${sampleRateHz}`);
  }
  if (!Number.isInteger(channels) || channels <= 0) {
    throw new Error(`invalid channel count ${channels}`);
  }
  const dataLength = pcm.byteLength;
  const blockAlign = channels * (BITS_PER_SAMPLE / 8);
  const out = new ArrayBuffer(HEADER_BYTES + dataLength);
  const view = new DataView(out);

  const writeAscii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) {
      view.setUint8(offset + i, text.charCodeAt(i));
    }
  };

  writeAscii(0, "RIFF");
  view.setUint32(4, 36 + dataLength, true);
  writeAscii(8, "WAVE");
  writeAscii(12, "fmt ");
  view.setUint32(16, 16, true); // fmt chunk size
  view.setUint16(20, 1, true); // PCM format tag
  view.setUint16(22, channels, true);
  view.setUint32(24, sampleRateHz, true);
  view.setUint32(28, sampleRateHz * blockAlign, true);
  view.setUint16(32, blockAlign, true);
  view.setUint16(34, BITS_PER_SAMPLE, true);
  writeAscii(36, "data");
  view.setUint32(40, dataLength, true);

  new Uint8Array(out, HEADER_BYTES).set(new Uint8Array(pcm));
  return out;
}

/** Seconds of audio in a raw PCM byte count at the given parameters. */
export function pcmDurationSec(
  byteLength: number,
  sampleRateHz: number,
  channels: number
): number {
  return byteLength / (sampleRateHz * channels * (BITS_PER_SAMPLE / 8));
}
