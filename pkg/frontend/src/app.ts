// One-screen form: enter a manuscript's metadata, get the verdict back.
// No routing, no client-side persistence, one in-flight submission.

import {
  FetchLike,
  ServiceError,
  VerdictView,
  defaultFetch,
  fetchHealth,
  predict,
} from "./api";
import {
  DEFAULT_YEAR_BOUNDS,
  FormValues,
  ValidationErrors,
  YearBounds,
  validateForm,
} from "./form";

export interface MountOptions {
  baseUrl: string;
  fetchFn?: FetchLike;
  yearBounds?: YearBounds;
}

export interface AppHandle {
  // programmatic equivalent of pressing the submit button
  submit(): Promise<void>;
  // resolves once the mount-time health probe has rendered
  healthChecked: Promise<void>;
}

const TEMPLATE = `
<header>
  <h1>Citation impact screening</h1>
  <p class="lede">
    Estimate from publication-time text whether a paper is likely to
    become highly cited in its field.
  </p>
  <p id="health-line" class="health">service: checking&hellip;</p>
</header>
<form id="predict-form" novalidate>
  <div class="field">
    <label for="title">Title</label>
    <input id="title" name="title" type="text" autocomplete="off" />
    <span class="field-error" data-for="title" hidden></span>
  </div>
  <div class="field">
    <label for="abstract">Abstract</label>
    <textarea id="abstract" name="abstract" rows="6"></textarea>
    <span class="field-error" data-for="abstract" hidden></span>
  </div>
  <div class="field">
    <label for="keywords">Keywords (separate with ;)</label>
    <input id="keywords" name="keywords" type="text" autocomplete="off" />
    <span class="field-error" data-for="keywords" hidden></span>
  </div>
  <div class="field">
    <label for="year">Publication year</label>
    <input id="year" name="year" type="text" inputmode="numeric" autocomplete="off" />
    <span class="field-error" data-for="year" hidden></span>
  </div>
  <div class="field">
    <label for="journal">Journal</label>
    <input id="journal" name="journal" type="text" autocomplete="off" />
    <button id="arxiv-shortcut" type="button">unpublished (arXiv)</button>
    <span class="field-error" data-for="journal" hidden></span>
  </div>
  <button id="submit" type="submit">Get verdict</button>
</form>
<div id="banner" role="alert" hidden>
  <span id="banner-text"></span>
  <button id="retry" type="button" hidden>Retry</button>
</div>
<section id="result" hidden>
  <h2 id="verdict"></h2>
  <p id="result-meta"></p>
  <p id="disclaimer" class="disclaimer"></p>
</section>
`;

const VERDICT_TEXT: Record<string, string> = {
  Positive: "Likely to become highly cited",
  Negative: "Unlikely to become highly cited",
};

export function mount(root: HTMLElement, options: MountOptions): AppHandle {
  const fetchFn = options.fetchFn ?? defaultFetch;
  const bounds = options.yearBounds ?? DEFAULT_YEAR_BOUNDS;
  root.innerHTML = TEMPLATE;
  root.dataset.status = "idle";

  const pick = <T extends HTMLElement>(selector: string): T => {
    const element = root.querySelector(selector);
    if (!element) throw new Error(`missing element: ${selector}`);
    return element as T;
  };

  const form = pick<HTMLFormElement>("#predict-form");
  const inputs = {
    title: pick<HTMLInputElement>("#title"),
    abstract: pick<HTMLTextAreaElement>("#abstract"),
    keywords: pick<HTMLInputElement>("#keywords"),
    year: pick<HTMLInputElement>("#year"),
    journal: pick<HTMLInputElement>("#journal"),
  };
  const submitButton = pick<HTMLButtonElement>("#submit");
  const arxivButton = pick<HTMLButtonElement>("#arxiv-shortcut");
  const banner = pick<HTMLDivElement>("#banner");
  const bannerText = pick<HTMLSpanElement>("#banner-text");
  const retryButton = pick<HTMLButtonElement>("#retry");
  const result = pick<HTMLElement>("#result");
  const verdictHeading = pick<HTMLHeadingElement>("#verdict");
  const resultMeta = pick<HTMLParagraphElement>("#result-meta");
  const disclaimer = pick<HTMLParagraphElement>("#disclaimer");
  const healthLine = pick<HTMLParagraphElement>("#health-line");

  const readValues = (): FormValues => ({
    title: inputs.title.value,
    abstract: inputs.abstract.value,
    keywords: inputs.keywords.value,
    year: inputs.year.value,
    journal: inputs.journal.value,
  });

  const clearFieldErrors = (): void => {
    for (const span of root.querySelectorAll<HTMLElement>(".field-error")) {
      span.textContent = "";
      span.hidden = true;
    }
  };

  const showFieldErrors = (errors: ValidationErrors): void => {
    for (const [field, message] of Object.entries(errors)) {
      const span = root.querySelector<HTMLElement>(
        `.field-error[data-for="${field}"]`,
      );
      if (span && message) {
        span.textContent = message;
        span.hidden = false;
      }
    }
  };

  const hideBanner = (): void => {
    banner.hidden = true;
    bannerText.textContent = "";
    retryButton.hidden = true;
  };

  const showBanner = (message: string, retryable: boolean): void => {
    bannerText.textContent = message;
    retryButton.hidden = !retryable;
    banner.hidden = false;
  };

  const renderResult = (view: VerdictView): void => {
    verdictHeading.textContent = VERDICT_TEXT[view.verdict] ?? view.verdict;
    verdictHeading.dataset.verdict = view.verdict;
    resultMeta.textContent =
      `window ${view.group} · templates ${view.templateVersion}` +
      ` · backend ${view.backend}`;
    disclaimer.textContent = view.disclaimer;
    result.hidden = false;
  };

  let pending = false;

  const submit = async (): Promise<void> => {
    if (pending) return;
    clearFieldErrors();
    hideBanner();
    result.hidden = true;

    const parsed = validateForm(readValues(), bounds);
    if (!parsed.ok) {
      showFieldErrors(parsed.errors);
      root.dataset.status = "idle";
      return;
    }

    pending = true;
    submitButton.disabled = true;
    root.dataset.status = "pending";
    try {
      const view = await predict(parsed.request, options.baseUrl, fetchFn);
      renderResult(view);
      root.dataset.status = "done";
    } catch (error) {
      if (error instanceof ServiceError && error.kind === "validation") {
        if (Object.keys(error.fieldErrors).length > 0) {
          showFieldErrors(error.fieldErrors);
        } else {
          showBanner(error.message, false);
        }
      } else if (error instanceof ServiceError) {
        showBanner(error.message, error.retryable);
      } else {
        showBanner("unexpected client error", true);
      }
      root.dataset.status = "error";
    } finally {
      pending = false;
      submitButton.disabled = false;
    }
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  retryButton.addEventListener("click", () => {
    void submit();
  });
  arxivButton.addEventListener("click", () => {
    inputs.journal.value = "arXiv";
    const span = root.querySelector<HTMLElement>(
      '.field-error[data-for="journal"]',
    );
    if (span) {
      span.textContent = "";
      span.hidden = true;
    }
  });

  const healthChecked = (async (): Promise<void> => {
    try {
      const view = await fetchHealth(options.baseUrl, fetchFn);
      healthLine.textContent =
        `service: ${view.status} · templates ${view.templateVersion}`;
    } catch {
      healthLine.textContent = "service: unreachable";
    }
  })();

  return { submit, healthChecked };
}
