#!/usr/bin/env python3
"""Regenerates src/unicode_tables.cpp from Python's unicodedata.

Emits sorted, merged codepoint intervals for the Unicode general
categories the toolkit classifies on (letters L*, punctuation P*) plus
the White_Space list. Run manually when bumping the Unicode version and
commit the result.
"""

import sys
import unicodedata


def intervals(pred):
    out = []
    start = None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
        else:
            if start is not None:
                out.append((start, cp - 1))
                start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_cat(cp, prefix):
    c = chr(cp)
    return unicodedata.category(c).startswith(prefix)


# White_Space per PropList; unicodedata lacks the property, so list the
# category-Z codepoints plus the five Cc whitespace controls and NEL.
WS_EXTRA = {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x85}


def is_ws(cp):
    return cp in WS_EXTRA or unicodedata.category(chr(cp)).startswith("Z")


def emit(name, ivs, out):
    out.write(f"const CodepointRange k{name}[] = {{\n")
    for i in range(0, len(ivs), 4):
        row = ", ".join(f"{{0x{a:04X}, 0x{b:04X}}}" for a, b in ivs[i : i + 4])
        out.write(f"    {row},\n")
    out.write("};\n")
    out.write(f"const std::size_t k{name}Count = {len(ivs)};\n\n")


def main():
    letters = intervals(lambda cp: is_cat(cp, "L"))
    punct = intervals(lambda cp: is_cat(cp, "P"))
    ws = intervals(is_ws)
    with open(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.cpp", "w") as out:
        out.write(
            "// Generated by scripts/gen_unicode_tables.py from Python unicodedata "
            f"(Unicode {unicodedata.unidata_version}). Do not edit by hand.\n"
            '#include "mtforge/unicode.hpp"\n\n'
            "namespace mtforge::detail {\n\n"
        )
        emit("LetterRanges", letters, out)
        emit("PunctRanges", punct, out)
        emit("WhitespaceRanges", ws, out)
        out.write("} // namespace mtforge::detail\n")
    print(f"letters={len(letters)} punct={len(punct)} ws={len(ws)}")


if __name__ == "__main__":
    main()
