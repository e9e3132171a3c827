export { canonicalJson } from "./canonical.js";
export {
  buildItem,
  buildRequest,
  ClientError,
  EndpointExhaustedError,
  RewardClient,
} from "./client.js";
export type { ClientConfig } from "./client.js";
export type {
  ItemResult,
  PromptMessage,
  RewardModelSpec,
  RewardRequest,
  RewardResponse,
  SampleRecord,
  VerifyItem,
} from "./types.js";
