export { ConfigurationError, DecodeError } from "./errors.js";
export {
  PROB_BITS,
  PROB_SCALE,
  RANS_L,
  StreamDecoder,
  decodeSymbols,
  encodeSymbols,
  quantizePmf,
  rowFromCounts,
  validateRow,
} from "./rans.js";
export type { CdfRow } from "./rans.js";
export {
  GroupSpec,
  MAGIC,
  StreamHeader,
  VERSION,
  crc32,
  pack,
  unpack,
} from "./container.js";
export type { UnpackedStream } from "./container.js";
