"""Regenerate src/fmxkit/cipher/_tables.py from the hex expansion of pi."""

import sys
from pathlib import Path

import mpmath

WORDS = 18 + 4 * 256


def pi_words(count: int) -> list[int]:
    bits = 32 * count
    mpmath.mp.prec = bits + 64
    frac = int(mpmath.floor((mpmath.pi - 3) * mpmath.mpf(2) ** bits))
    return [(frac >> (32 * (count - 1 - i))) & 0xFFFFFFFF for i in range(count)]


def render(words: list[int]) -> str:
    out = ['"""Blowfish initial P-array and S-boxes (fractional hex digits of pi).',
           "",
           "Generated by tools/gen_pi_tables.py; do not edit.",
           '"""', ""]

    def block(name, vals):
        out.append(f"{name} = (")
        for i in range(0, len(vals), 6):
            out.append("    " + " ".join(f"0x{v:08X}," for v in vals[i:i + 6]))
        out.append(")")
        out.append("")

    block("P_INIT", words[:18])
    for b in range(4):
        block(f"S{b}_INIT", words[18 + 256 * b: 18 + 256 * (b + 1)])
    return "\n".join(out)


if __name__ == "__main__":
    target = Path(sys.argv[1] if len(sys.argv) > 1 else "src/fmxkit/cipher/_tables.py")
    target.write_text(render(pi_words(WORDS)))
