import type { ModelInfo, PredictResponse } from './types.js';

/**
 * Form state for the iterative query loop: type a sentence, click the
 * target token, pick a model, read the ranked profile, repeat.
 *
 * Submission is gated on a non-empty sentence plus a token actually
 * selected from that sentence. One request may be in flight at a time;
 * responses carry the epoch of the request that produced them, and any
 * response from a superseded submission is discarded so a slow reply can
 * never clobber a newer one. An API error surfaces as a message without
 * touching the sentence, selection, or model choice.
 */
export class QueryFormState {
  sentence = '';
  selectedIndex: number | null = null;
  models: ModelInfo[] = [];
  modelId: string | null = null;
  lastResponse: PredictResponse | null = null;
  pinnedResponse: PredictResponse | null = null;
  errorMessage: string | null = null;

  private epoch = 0;
  private inFlightEpoch: number | null = null;

  setSentence(sentence: string): void {
    if (sentence === this.sentence) return;
    this.sentence = sentence;
    this.selectedIndex = null; // token list changed under the selection
  }

  tokens(): string[] {
    return this.sentence.split(/\s+/).filter((t) => t.length > 0);
  }

  selectToken(index: number): void {
    if (index >= 0 && index < this.tokens().length) {
      this.selectedIndex = index;
    }
  }

  get word(): string | null {
    const tokens = this.tokens();
    if (this.selectedIndex === null || this.selectedIndex >= tokens.length) {
      return null;
    }
    return tokens[this.selectedIndex];
  }

  /** Occurrence index: how many identical tokens precede the selection. */
  get occurrence(): number {
    const tokens = this.tokens();
    if (this.selectedIndex === null) return 0;
    const word = tokens[this.selectedIndex];
    return tokens.slice(0, this.selectedIndex).filter((t) => t === word).length;
  }

  setModels(models: ModelInfo[]): void {
    this.models = models;
    if (this.modelId === null && models.length > 0) {
      this.modelId = models[0].model_id;
    }
  }

  canSubmit(): boolean {
    return (
      this.sentence.trim().length > 0 &&
      this.selectedIndex !== null &&
      this.word !== null &&
      this.modelId !== null &&
      this.inFlightEpoch === null
    );
  }

  beginRequest(): number {
    this.epoch += 1;
    this.inFlightEpoch = this.epoch;
    return this.epoch;
  }

  /** Returns true when the response was current and got applied. */
  applyResponse(epoch: number, response: PredictResponse): boolean {
    if (epoch !== this.epoch) {
      return false; // stale: a newer submission superseded this one
    }
    this.inFlightEpoch = null;
    this.lastResponse = response;
    this.errorMessage = null;
    return true;
  }

  applyError(epoch: number, message: string): boolean {
    if (epoch !== this.epoch) {
      return false;
    }
    this.inFlightEpoch = null;
    this.errorMessage = message;
    return true;
  }

  pinForCompare(): void {
    if (this.lastResponse !== null) {
      this.pinnedResponse = this.lastResponse;
    }
  }

  clearPin(): void {
    this.pinnedResponse = null;
  }
}
