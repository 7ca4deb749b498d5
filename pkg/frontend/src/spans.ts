/**
 * Pure span-editing logic for the token-click labeling view.
 *
 * Spans are half-open token ranges [start, end) kept sorted and
 * non-overlapping per sentence. Rendered spans map 1:1 onto the wire
 * format (SpanLabel), so a submitted batch round-trips bitwise.
 */

import type { SpanLabel } from "./types.js";

/** A span within one sentence. */
export interface Span {
  start: number;
  end: number;
}

/** Spans per sentence id. */
export type SpanSet = Map<number, Span[]>;

function sorted(spans: Span[]): Span[] {
  return [...spans].sort((a, b) => a.start - b.start);
}

function overlaps(a: Span, b: Span): boolean {
  return a.start < b.end && b.start < a.end;
}

/** Validate a prospective span against sentence length. */
export function isValidSpan(span: Span, sentenceLength: number): boolean {
  return (
    Number.isInteger(span.start) &&
    Number.isInteger(span.end) &&
    span.start >= 0 &&
    span.start < span.end &&
    span.end <= sentenceLength
  );
}

/**
 * Toggle a span produced by a click-drag gesture.
 *
 * - The exact same span again removes it.
 * - A span overlapping existing ones replaces everything it touches.
 * - Otherwise the span is added.
 *
 * Returns a new sorted, non-overlapping array.
 */
export function toggleSpan(spans: Span[], gesture: Span): Span[] {
  const exact = spans.some(
    (s) => s.start === gesture.start && s.end === gesture.end,
  );
  const kept = spans.filter((s) => !overlaps(s, gesture));
  if (exact) {
    return sorted(kept);
  }
  return sorted([...kept, { start: gesture.start, end: gesture.end }]);
}

/** Single-token click: shorthand for a width-1 drag. */
export function toggleToken(spans: Span[], index: number): Span[] {
  return toggleSpan(spans, { start: index, end: index + 1 });
}

/** True when every span is in bounds, ordered, and disjoint. */
export function isConsistent(spans: Span[], sentenceLength: number): boolean {
  for (let i = 0; i < spans.length; i++) {
    if (!isValidSpan(spans[i], sentenceLength)) return false;
    if (i > 0 && spans[i].start < spans[i - 1].end) return false;
  }
  return true;
}

/** Flatten the per-sentence span sets into the wire format. */
export function toWire(spanSet: SpanSet): SpanLabel[] {
  const out: SpanLabel[] = [];
  for (const sentenceId of [...spanSet.keys()].sort((a, b) => a - b)) {
    for (const span of sorted(spanSet.get(sentenceId) ?? [])) {
      out.push({ sentence_id: sentenceId, start: span.start, end: span.end });
    }
  }
  return out;
}

/** Rebuild per-sentence span sets from the wire format. */
export function fromWire(labels: SpanLabel[]): SpanSet {
  const spanSet: SpanSet = new Map();
  for (const label of labels) {
    const spans = spanSet.get(label.sentence_id) ?? [];
    spans.push({ start: label.start, end: label.end });
    spanSet.set(label.sentence_id, sorted(spans));
  }
  return spanSet;
}
