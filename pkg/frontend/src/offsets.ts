/**
 * Offset conversion between JavaScript UTF-16 string indices and the
 * Unicode code point offsets the annotation service validates against.
 *
 * DOM selections yield UTF-16 indices; the service (and every exported
 * record) counts code points, so characters outside the BMP (emoji,
 * some symbols) occupy two UTF-16 units but one code point.
 */

/** Code points in `text` (equivalent to `[...text].length`). */
export function codePointLength(text: string): number {
  let count = 0;
  for (let i = 0; i < text.length; ) {
    const code = text.codePointAt(i);
    if (code === undefined) break;
    i += code > 0xffff ? 2 : 1;
    count += 1;
  }
  return count;
}

/** Convert a UTF-16 index into a code point offset. */
export function utf16ToCodePoint(text: string, utf16Index: number): number {
  if (utf16Index < 0 || utf16Index > text.length) {
    throw new RangeError(`utf16 index ${utf16Index} outside [0, ${text.length}]`);
  }
  let cp = 0;
  for (let i = 0; i < utf16Index; ) {
    const code = text.codePointAt(i);
    if (code === undefined) break;
    const width = code > 0xffff ? 2 : 1;
    if (i + width > utf16Index) {
      // Index splits a surrogate pair; snap to the code point start.
      return cp;
    }
    i += width;
    cp += 1;
  }
  return cp;
}

/** Convert a code point offset into a UTF-16 index. */
export function codePointToUtf16(text: string, cpIndex: number): number {
  if (cpIndex < 0) {
    throw new RangeError(`code point index ${cpIndex} negative`);
  }
  let cp = 0;
  let i = 0;
  while (i < text.length && cp < cpIndex) {
    const code = text.codePointAt(i);
    if (code === undefined) break;
    i += code > 0xffff ? 2 : 1;
    cp += 1;
  }
  if (cp < cpIndex) {
    throw new RangeError(`code point index ${cpIndex} outside text of length ${cp}`);
  }
  return i;
}

/** Slice `text` by code point offsets. */
export function codePointSlice(text: string, start: number, end: number): string {
  return text.slice(codePointToUtf16(text, start), codePointToUtf16(text, end));
}

/** Ranges (code point offsets) of every sentinel token in the text. */
export function sentinelRanges(text: string, sentinel: string): Array<[number, number]> {
  const ranges: Array<[number, number]> = [];
  const sentinelCp = codePointLength(sentinel);
  let from = 0;
  for (;;) {
    const idx = text.indexOf(sentinel, from);
    if (idx < 0) break;
    const startCp = utf16ToCodePoint(text, idx);
    ranges.push([startCp, startCp + sentinelCp]);
    from = idx + sentinel.length;
  }
  return ranges;
}
