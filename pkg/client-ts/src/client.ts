/**
 * Reward-service client: builds verify requests from samples plus
 * responses, submits them across endpoints (least outstanding requests
 * first) with exponential-backoff retries, and returns per-item reward
 * breakdowns aligned to input order. All reward math stays server-side.
 */

import { canonicalJson } from "./canonical.js";
import type {
  ItemResult,
  RewardRequest,
  RewardResponse,
  SampleRecord,
  VerifyItem,
} from "./types.js";

export interface ClientConfig {
  endpoints: string[];
  maxRetries?: number;
  timeoutMs?: number;
  workers?: number;
  backoffMs?: number;
}

const DEFAULTS = { maxRetries: 3, timeoutMs: 30_000, workers: 4, backoffMs: 100 };

export class EndpointExhaustedError extends Error {
  readonly batchId: string;

  constructor(batchId: string, detail: string) {
    super(`batch ${JSON.stringify(batchId)} exhausted its retries: ${detail}`);
    this.batchId = batchId;
  }
}

export class ClientError extends Error {}

class AttemptFailed extends Error {
  constructor(readonly endpoint: string, readonly detail: string) {
    super(detail);
  }
}

/** Tracks outstanding requests per endpoint; picks the least loaded. */
class Balancer {
  private readonly outstanding = new Map<string, number>();

  constructor(private readonly order: string[]) {
    for (const endpoint of order) this.outstanding.set(endpoint, 0);
  }

  acquire(avoid?: string): string {
    const candidates = this.order.filter((e) => e !== avoid);
    const pool = candidates.length > 0 ? candidates : this.order;
    let best = pool[0];
    for (const endpoint of pool) {
      if ((this.outstanding.get(endpoint) ?? 0) < (this.outstanding.get(best) ?? 0)) {
        best = endpoint;
      }
    }
    this.outstanding.set(best, (this.outstanding.get(best) ?? 0) + 1);
    return best;
  }

  release(endpoint: string): void {
    this.outstanding.set(endpoint, (this.outstanding.get(endpoint) ?? 1) - 1);
  }
}

export function buildItem(sample: SampleRecord, response: string): VerifyItem {
  const rm = sample.reward_model;
  return {
    id: sample.extra_info.id,
    data_source: sample.data_source,
    ability: sample.ability,
    verifier: rm.verifier,
    verifier_parm: rm.verifier_parm,
    response,
    answer: rm.answer,
    ground_truth: rm.ground_truth,
    accuracy_ratio: rm.accuracy_ratio,
    format_ratio: rm.format_ratio,
  };
}

export function buildRequest(
  batchId: string,
  trainingProgress: number,
  samples: SampleRecord[],
  responses: string[],
): RewardRequest {
  if (samples.length !== responses.length) {
    throw new Error("samples and responses must be parallel lists");
  }
  if (samples.length === 0) {
    throw new Error("nothing to score");
  }
  return {
    batch_id: batchId,
    training_progress: trainingProgress,
    items: samples.map((sample, i) => buildItem(sample, responses[i])),
  };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class RewardClient {
  private readonly config: Required<ClientConfig>;
  private readonly balancer: Balancer;

  constructor(config: ClientConfig) {
    if (!config.endpoints || config.endpoints.length === 0) {
      throw new Error("need at least one endpoint");
    }
    if (config.timeoutMs !== undefined && config.timeoutMs <= 0) {
      throw new Error("timeoutMs must be positive");
    }
    this.config = { ...DEFAULTS, ...config };
    this.balancer = new Balancer(this.config.endpoints);
  }

  private async sendOnce(body: string, avoid?: string): Promise<RewardResponse> {
    const endpoint = this.balancer.acquire(avoid);
    let reply: Response;
    try {
      reply = await fetch(endpoint.replace(/\/$/, "") + "/v1/verify", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body,
        signal: AbortSignal.timeout(this.config.timeoutMs),
      });
    } catch (err) {
      throw new AttemptFailed(endpoint, `transport error: ${String(err)}`);
    } finally {
      this.balancer.release(endpoint);
    }
    if (reply.status >= 500) {
      throw new AttemptFailed(endpoint, `server error ${reply.status}`);
    }
    if (reply.status >= 400) {
      throw new ClientError(`${reply.status}: ${await reply.text()}`);
    }
    return (await reply.json()) as RewardResponse;
  }

  async sendRequest(request: RewardRequest): Promise<RewardResponse> {
    const body = canonicalJson(request);
    let last = "no attempt made";
    let failedEndpoint: string | undefined;
    for (let attempt = 0; attempt < this.config.maxRetries; attempt++) {
      if (attempt > 0) {
        await sleep(this.config.backoffMs * 2 ** (attempt - 1));
      }
      try {
        // retries steer away from the endpoint that just failed
        return await this.sendOnce(body, failedEndpoint);
      } catch (err) {
        if (err instanceof AttemptFailed) {
          failedEndpoint = err.endpoint;
          last = err.detail;
          continue;
        }
        throw err;
      }
    }
    throw new EndpointExhaustedError(request.batch_id, last);
  }

  /** Score parallel (samples, responses); results follow input order. */
  async submit(
    samples: SampleRecord[],
    responses: string[],
    trainingProgress: number,
    batchId = "batch-0",
  ): Promise<ItemResult[]> {
    const request = buildRequest(batchId, trainingProgress, samples, responses);
    const response = await this.sendRequest(request);
    const byId = new Map(response.results.map((r) => [r.id, r]));
    return request.items.map((item) => {
      const result = byId.get(item.id);
      if (!result) {
        throw new Error(`response missing result for item ${item.id}`);
      }
      return result;
    });
  }

  /** Send batches through the worker pool; yield responses as completed. */
  async *submitBatches(requests: RewardRequest[]): AsyncGenerator<RewardResponse> {
    const pending = new Map<number, Promise<[number, RewardResponse]>>();
    let next = 0;
    const launch = () => {
      if (next >= requests.length) return;
      const index = next++;
      pending.set(
        index,
        this.sendRequest(requests[index]).then((r) => [index, r]),
      );
    };
    while (pending.size < this.config.workers && next < requests.length) {
      launch();
    }
    while (pending.size > 0) {
      const [index, response] = await Promise.race(pending.values());
      pending.delete(index);
      launch();
      yield response;
    }
  }
}
