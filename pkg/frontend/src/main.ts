import { ApiClient, ApiError } from './api.js';
import { renderComparison, renderError, renderRankedFeatures } from './render.js';
import { QueryFormState } from './state.js';

const api = new ApiClient('');
const state = new QueryFormState();

const sentenceInput = document.getElementById('sentence') as HTMLInputElement;
const tokenRow = document.getElementById('tokens') as HTMLDivElement;
const modelSelect = document.getElementById('model') as HTMLSelectElement;
const submitButton = document.getElementById('submit') as HTMLButtonElement;
const pinButton = document.getElementById('pin') as HTMLButtonElement;
const clearPinButton = document.getElementById('clear-pin') as HTMLButtonElement;
const resultPane = document.getElementById('result') as HTMLDivElement;
const statusPane = document.getElementById('status') as HTMLDivElement;

function renderTokens(): void {
  tokenRow.replaceChildren();
  state.tokens().forEach((token, index) => {
    const chip = document.createElement('button');
    chip.type = 'button';
    chip.className =
      index === state.selectedIndex ? 'token-chip selected' : 'token-chip';
    chip.textContent = token;
    chip.addEventListener('click', () => {
      state.selectToken(index);
      refresh();
    });
    tokenRow.appendChild(chip);
  });
}

function renderModels(): void {
  modelSelect.replaceChildren();
  for (const model of state.models) {
    const option = document.createElement('option');
    option.value = model.model_id;
    option.textContent =
      `${model.model_id} (${model.source_model} L${model.layer} ` +
      `→ ${model.norm_space})`;
    modelSelect.appendChild(option);
  }
  if (state.modelId !== null) {
    modelSelect.value = state.modelId;
  }
}

function renderResult(): void {
  if (state.errorMessage !== null) {
    statusPane.innerHTML = renderError(state.errorMessage);
  } else {
    statusPane.innerHTML = '';
  }
  try {
    if (state.pinnedResponse !== null || state.lastResponse !== null) {
      resultPane.innerHTML =
        state.pinnedResponse !== null
          ? renderComparison(state.pinnedResponse, state.lastResponse)
          : renderRankedFeatures(state.lastResponse!);
    } else {
      resultPane.innerHTML = '<p class="placeholder">pick a word and submit</p>';
    }
  } catch (err) {
    statusPane.innerHTML = renderError(String(err));
  }
  pinButton.disabled = state.lastResponse === null;
  clearPinButton.disabled = state.pinnedResponse === null;
}

function refresh(): void {
  renderTokens();
  submitButton.disabled = !state.canSubmit();
  renderResult();
}

async function submit(): Promise<void> {
  if (!state.canSubmit()) return;
  const epoch = state.beginRequest();
  refresh();
  try {
    const response = await api.predict({
      sentence: state.sentence,
      word: state.word!,
      occurrence: state.occurrence,
      model_id: state.modelId!,
    });
    state.applyResponse(epoch, response);
  } catch (err) {
    const message =
      err instanceof ApiError ? `${err.error}: ${err.detail}` : String(err);
    state.applyError(epoch, message);
  }
  refresh();
}

sentenceInput.addEventListener('input', () => {
  state.setSentence(sentenceInput.value);
  refresh();
});
modelSelect.addEventListener('change', () => {
  state.modelId = modelSelect.value;
  refresh();
});
submitButton.addEventListener('click', () => void submit());
pinButton.addEventListener('click', () => {
  state.pinForCompare();
  refresh();
});
clearPinButton.addEventListener('click', () => {
  state.clearPin();
  refresh();
});

void api
  .listModels()
  .then((models) => {
    state.setModels(models);
    renderModels();
    refresh();
  })
  .catch((err) => {
    statusPane.innerHTML = renderError(`could not load models: ${String(err)}`);
  });
