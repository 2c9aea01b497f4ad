"""Answer extraction and canonicalization rules.

Extraction is total: output that yields no answer maps to a reserved token
that is always distinct from any canonicalized gold answer.  Canonicalization
is deliberately simple and documented: strip whitespace, normalize numeric
strings (drop a leading '+', drop trailing fractional zeros), uppercase
multiple-choice letters; everything else matches exactly.
"""

from __future__ import annotations

import re

UNPARSEABLE = "<unparseable>"

_BOXED = re.compile(r"\\boxed\{([^{}]*)\}")
_MC_LETTER = re.compile(r"\b([A-Ea-e])\b")
_NUMERIC = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)")


def extract_answer(text: str, rule: str) -> str | None:
    """Pull the raw answer string out of one decoded path; None if absent."""
    if rule == "boxed":
        matches = _BOXED.findall(text)
        return matches[-1] if matches else None
    if rule == "mc-letter":
        matches = _MC_LETTER.findall(text)
        return matches[-1] if matches else None
    if rule.startswith("regex:"):
        pattern = rule[len("regex:"):]
        matches = list(re.finditer(pattern, text))
        if not matches:
            return None
        last = matches[-1]
        return last.group(1) if last.groups() else last.group(0)
    raise ValueError(f"unknown answer rule {rule!r}")


def _normalize_numeric(text: str) -> str:
    if not _NUMERIC.fullmatch(text):
        return text
    out = text.lstrip("+")
    if "." in out:
        out = out.rstrip("0").rstrip(".")
    if out in ("", "-"):
        out = "0"
    return out


def canonicalize_answer(raw: str | None, rule: str) -> str:
    """Map a raw extracted answer to its canonical string (total function)."""
    if raw is None:
        return UNPARSEABLE
    text = " ".join(raw.split())
    if text == "":
        return UNPARSEABLE
    if rule == "mc-letter":
        return text.upper()
    return _normalize_numeric(text)
