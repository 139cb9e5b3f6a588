#!/usr/bin/env python3
"""Regenerates include/icd/unicode_data.hpp from the Python unicodedata module.

Tables emitted:
  - full canonical decompositions (NFD, recursively expanded, Hangul excluded)
  - nonzero canonical combining classes
  - primary composites (canonical pairs that survive NFC round-trip)
  - simple 1:1 lowercase mappings
  - codepoint ranges for punctuation/symbols and whitespace

Run from the repository root:  python3 tools/gen_unicode_tables.py
"""

import sys
import unicodedata

MAX_CP = 0x110000
HANGUL_S_BASE, HANGUL_S_COUNT = 0xAC00, 11172


def is_hangul_syllable(cp: int) -> bool:
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def canonical_decomposition(cp: int):
    raw = unicodedata.decomposition(chr(cp))
    if not raw or raw.startswith("<"):
        return None
    return [int(p, 16) for p in raw.split()]


def full_decomposition(cp: int, memo):
    if cp in memo:
        return memo[cp]
    parts = canonical_decomposition(cp)
    if parts is None or is_hangul_syllable(cp):
        memo[cp] = [cp]
        return memo[cp]
    out = []
    for p in parts:
        out.extend(full_decomposition(p, memo))
    memo[cp] = out
    return out


def build():
    memo = {}
    decomp = {}
    ccc = {}
    comp = {}
    lower = {}
    punct = []
    space = []

    for cp in range(MAX_CP):
        ch = chr(cp)
        c = unicodedata.combining(ch)
        if c:
            ccc[cp] = c
        if not is_hangul_syllable(cp):
            parts = canonical_decomposition(cp)
            if parts is not None:
                full = full_decomposition(cp, memo)
                if full != [cp]:
                    decomp[cp] = full
                if len(parts) == 2 and unicodedata.combining(chr(parts[0])) == 0:
                    # Primary composite iff NFC(NFD(ch)) round-trips back to ch.
                    if unicodedata.normalize("NFC", unicodedata.normalize("NFD", ch)) == ch:
                        comp[(parts[0], parts[1])] = cp
        lo = ch.lower()
        if len(lo) == 1 and lo != ch:
            lower[cp] = ord(lo)
        cat = unicodedata.category(ch)
        if cp > 0x7F and (cat.startswith("P") or cat.startswith("S")):
            punct.append(cp)
        if ch.isspace():
            space.append(cp)

    return decomp, ccc, comp, lower, to_ranges(punct), to_ranges(space)


def to_ranges(cps):
    ranges = []
    for cp in cps:
        if ranges and cp == ranges[-1][1] + 1:
            ranges[-1][1] = cp
        else:
            ranges.append([cp, cp])
    return ranges


def main():
    decomp, ccc, comp, lower, punct_ranges, space_ranges = build()

    pool = []
    index = []
    for cp in sorted(decomp):
        seq = decomp[cp]
        index.append((cp, len(pool), len(seq)))
        pool.extend(seq)

    out = sys.stdout
    w = out.write
    w("// Generated by tools/gen_unicode_tables.py (unicodedata %s). Do not edit.\n" % unicodedata.unidata_version)
    w("#pragma once\n\n#include <cstdint>\n\nnamespace icd::unicode_data {\n\n")

    w("struct DecompEntry { char32_t cp; uint32_t offset; uint8_t len; };\n")
    w("struct CccEntry { char32_t cp; uint8_t ccc; };\n")
    w("struct CompEntry { char32_t first; char32_t second; char32_t composed; };\n")
    w("struct LowerEntry { char32_t cp; char32_t lower; };\n")
    w("struct Range { char32_t lo; char32_t hi; };\n\n")

    w("inline constexpr DecompEntry kDecomp[] = {\n")
    for cp, off, ln in index:
        w("  {0x%X,%d,%d},\n" % (cp, off, ln))
    w("};\n\n")

    w("inline constexpr char32_t kDecompPool[] = {\n")
    for i in range(0, len(pool), 12):
        w("  " + ",".join("0x%X" % c for c in pool[i:i + 12]) + ",\n")
    w("};\n\n")

    w("inline constexpr CccEntry kCcc[] = {\n")
    for cp in sorted(ccc):
        w("  {0x%X,%d},\n" % (cp, ccc[cp]))
    w("};\n\n")

    w("inline constexpr CompEntry kComp[] = {\n")
    for (a, b) in sorted(comp):
        w("  {0x%X,0x%X,0x%X},\n" % (a, b, comp[(a, b)]))
    w("};\n\n")

    w("inline constexpr LowerEntry kLower[] = {\n")
    for cp in sorted(lower):
        w("  {0x%X,0x%X},\n" % (cp, lower[cp]))
    w("};\n\n")

    w("inline constexpr Range kPunctOrSymbol[] = {\n")
    for lo, hi in punct_ranges:
        w("  {0x%X,0x%X},\n" % (lo, hi))
    w("};\n\n")

    w("inline constexpr Range kSpace[] = {\n")
    for lo, hi in space_ranges:
        w("  {0x%X,0x%X},\n" % (lo, hi))
    w("};\n\n")

    w("} // namespace icd::unicode_data\n")


if __name__ == "__main__":
    main()
