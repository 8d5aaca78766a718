// Client-side mirror of the service's request rules, so obviously bad
// submissions never leave the browser.

import type { PredictRequestBody } from "./api";

export interface FormValues {
  title: string;
  abstract: string;
  keywords: string;
  year: string;
  journal: string;
}

export type FieldName = "title" | "abstract" | "keywords" | "year" | "journal";

export type ValidationErrors = Partial<Record<FieldName, string>>;

export interface YearBounds {
  min: number;
  max: number;
}

// Matches the service defaults.
export const DEFAULT_YEAR_BOUNDS: YearBounds = { min: 1991, max: 2100 };

export function splitKeywords(text: string): string[] {
  return text
    .split(";")
    .map((part) => part.trim())
    .filter((part) => part.length > 0);
}

export type ValidationResult =
  | { ok: true; request: PredictRequestBody }
  | { ok: false; errors: ValidationErrors };

export function validateForm(
  values: FormValues,
  bounds: YearBounds = DEFAULT_YEAR_BOUNDS,
): ValidationResult {
  const errors: ValidationErrors = {};

  const title = values.title.trim();
  if (!title) {
    errors.title = "title required";
  }

  const journal = values.journal.trim();
  if (!journal) {
    errors.journal = "journal required";
  }

  const yearText = values.year.trim();
  let year = 0;
  if (!yearText) {
    errors.year = "year required";
  } else if (!/^\d+$/.test(yearText)) {
    errors.year = "year must be a whole number";
  } else {
    year = Number(yearText);
    if (year < bounds.min || year > bounds.max) {
      errors.year = `year must be between ${bounds.min} and ${bounds.max}`;
    }
  }

  if (Object.keys(errors).length > 0) {
    return { ok: false, errors };
  }
  return {
    ok: true,
    request: {
      title,
      abstract: values.abstract.trim(),
      keywords: splitKeywords(values.keywords),
      year,
      journal,
    },
  };
}
