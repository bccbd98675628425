/** Comparison-report panel model.
 *
 * The panel never reformats a metric: each displayed value is the exact
 * byte slice of the number literal in the service's JSON payload, so what
 * the user reads is what the service said, digit for digit.
 */

import { ComparePayload } from "./types.js";

const NUM_CHARS = "0123456789+-.eE";

/**
 * Scan a JSON document and return the raw text slice of every number,
 * keyed by its path (object keys and array indices joined with "/").
 */
export function rawNumbers(text: string): Map<string, string> {
  const out = new Map<string, string>();
  let pos = 0;

  const ws = () => {
    while (pos < text.length && " \t\n\r".includes(text[pos])) pos++;
  };

  const string = (): string => {
    // pos sits on the opening quote
    pos++;
    const start = pos;
    while (pos < text.length && text[pos] !== '"') {
      if (text[pos] === "\\") pos++;
      pos++;
    }
    const raw = text.slice(start, pos);
    pos++;
    return JSON.parse(`"${raw}"`);
  };

  const value = (path: string): void => {
    ws();
    const c = text[pos];
    if (c === "{") {
      pos++;
      ws();
      if (text[pos] === "}") {
        pos++;
        return;
      }
      for (;;) {
        ws();
        const key = string();
        ws();
        pos++; // ':'
        value(path === "" ? key : `${path}/${key}`);
        ws();
        if (text[pos] === ",") {
          pos++;
          continue;
        }
        pos++; // '}'
        return;
      }
    } else if (c === "[") {
      pos++;
      ws();
      if (text[pos] === "]") {
        pos++;
        return;
      }
      for (let i = 0; ; i++) {
        value(`${path}/${i}`);
        ws();
        if (text[pos] === ",") {
          pos++;
          continue;
        }
        pos++; // ']'
        return;
      }
    } else if (c === '"') {
      string();
    } else if (c === "t" || c === "f" || c === "n") {
      pos += c === "f" ? 5 : 4;
    } else {
      const start = pos;
      while (pos < text.length && NUM_CHARS.includes(text[pos])) pos++;
      out.set(path, text.slice(start, pos));
    }
  };

  value("");
  return out;
}

export interface PanelRow {
  label: string;
  text: string; // verbatim payload bytes, or "-" for null
}

export interface ComparePanel {
  raw: string;
  data: ComparePayload;
  headline: PanelRow[];
  perClass: { name: string; rows: PanelRow[] }[];
}

const COLUMNS = ["optical", "fused", "delta"] as const;

export function buildComparePanel(raw: string): ComparePanel {
  const data = JSON.parse(raw) as ComparePayload;
  const nums = rawNumbers(raw);
  const slice = (path: string): string => {
    const s = nums.get(path);
    if (s === undefined) throw new Error(`no number at ${path} in payload`);
    return s;
  };

  const headline: PanelRow[] = [];
  for (const metric of ["overall_accuracy", "kappa"] as const) {
    for (const col of COLUMNS) {
      headline.push({ label: `${metric} ${col}`, text: slice(`${metric}/${col}`) });
    }
  }

  const perClass: ComparePanel["perClass"] = [];
  const ids = Object.keys(data.per_class).sort((a, b) => Number(a) - Number(b));
  for (const id of ids) {
    const entry = data.per_class[id];
    const rows: PanelRow[] = [];
    for (const kind of ["producers", "users"] as const) {
      for (const col of ["optical", "fused"] as const) {
        const text =
          entry[kind][col] === null ? "-" : slice(`per_class/${id}/${kind}/${col}`);
        rows.push({ label: `${kind} ${col}`, text });
      }
    }
    perClass.push({ name: entry.name, rows });
  }
  return { raw, data, headline, perClass };
}
