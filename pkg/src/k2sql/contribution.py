"""Ground-truth SQL contribution check.

Decides whether every atomic statement of a knowledge string is actually
used by the reference SQL.  Containment is textual: both sides are pushed
through the same canonical form and the knowledge payload must appear as a
substring of the query.
"""

from __future__ import annotations

import re
from typing import Sequence

from .model import Knowledge, _quoted_mask

PHRASE_MARKERS: tuple[str, ...] = ("refers to", "refer to", "means")

_WS_RUN = re.compile(r"\s+")
_OP_SPACING = re.compile(r"\s*([=<>+\-*/,()])\s*")
_TRAILING_PUNCT = " \t\r\n.!?,;"


def _unify_identifier_quotes(text: str) -> str:
    """Rewrite double-quoted and bracketed identifiers to backticks.

    Single-quoted string literals are copied verbatim.  Any unclosed quote
    region disables the rewrite for the whole string; converting the part
    before it would let a second pass pair converted output with quote
    characters inside the dangling region, breaking idempotence.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "'":
            j = i + 1
            end = -1
            while j < n:
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        j += 2
                        continue
                    end = j
                    break
                j += 1
            if end == -1:
                return text
            out.append(text[i : end + 1])
            i = end + 1
            continue
        if ch in ("`", '"', "["):
            closer = {"`": "`", '"': '"', "[": "]"}[ch]
            end = text.find(closer, i + 1)
            if end == -1:
                return text
            out.append("`")
            out.append(text[i + 1 : end])
            out.append("`")
            i = end + 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def normalize(text: str) -> str:
    """Canonicalize SQL-ish text for substring containment.

    Identifier quoting collapses to backticks, everything is lowercased,
    whitespace runs become single spaces, and spaces next to operators,
    commas, and parentheses disappear.  Idempotent.
    """
    s = _unify_identifier_quotes(text)
    s = s.lower()
    s = _WS_RUN.sub(" ", s)
    s = _OP_SPACING.sub(r"\1", s)
    return s.strip()


def _is_bare_equals(text: str, i: int) -> bool:
    # skip '=' that belongs to <=, >=, !=, or ==
    if i > 0 and text[i - 1] in "<>!=":
        return False
    if i + 1 < len(text) and text[i + 1] == "=":
        return False
    return True


def extract_payload(fragment: str, phrase_markers: Sequence[str] = PHRASE_MARKERS) -> str:
    """Pull the SQL-side expression out of a knowledge fragment.

    Preference order: text after the last phrase marker ("refers to" and
    friends), else text after the first top-level "=" whose left side holds
    no backtick-quoted identifier, else the whole fragment.  Trailing
    sentence punctuation is stripped.
    """
    low = fragment.lower()
    cut = -1
    for marker in phrase_markers:
        pos = low.rfind(marker.lower())
        if pos >= 0:
            cut = max(cut, pos + len(marker))
    if cut < 0:
        mask = _quoted_mask(fragment)
        for i, ch in enumerate(fragment):
            if ch != "=" or mask[i] or not _is_bare_equals(fragment, i):
                continue
            if "`" in fragment[:i]:
                break
            cut = i + 1
            break
    payload = fragment[cut:] if cut >= 0 else fragment
    return payload.strip().rstrip(_TRAILING_PUNCT)


def indicator_sql(knowledge: Knowledge, gold_sql: str) -> int:
    """Contribution indicator: 1 iff every fragment is used by the SQL.

    An empty fragment list is vacuously contributing.
    """
    if not gold_sql:
        raise ValueError("gold_sql must be non-empty")
    target = normalize(gold_sql)
    for fragment in knowledge.sub_knowledge:
        if normalize(extract_payload(fragment)) not in target:
            return 0
    return 1


def contribution_report(
    instance_id: str, variant: str, knowledge: Knowledge, gold_sql: str
) -> dict:
    """Per-instance containment detail in the export format."""
    target = normalize(gold_sql)
    payloads = [extract_payload(f) for f in knowledge.sub_knowledge]
    contained = [normalize(p) in target for p in payloads]
    return {
        "instance_id": instance_id,
        "variant": variant,
        "fragments": list(knowledge.sub_knowledge),
        "payloads": payloads,
        "contained": contained,
        "indicator": 1 if all(contained) else 0,
    }
