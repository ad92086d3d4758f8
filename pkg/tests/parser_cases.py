"""Formatting-varied model answers with known content, plus a fuzzer that mangles them."""

from __future__ import annotations

import random

from stereoscan.framework import CRITERION_IDS, Verdict

PREAMBLES = ["", "Here is my assessment.\n\n", "Sure! Below are the checks.\n", "Analysis:\nThe project shows a cat.\n\n"]
LINE_STYLES = [
    "{id}: {s}",
    "{id} : {s}",
    "{id}:{s}",
    "- {id}: {s}",
    "* {id}: {s}",
    "• {id}: {s}",
    "{n}. {id}: {s}",
    "**{id}**: {s}",
    "**{id}: {s}**",
    "- **{id}**: **{s}**",
    "{lid}: {s}",
    "  {id}:  {s}   ",
]
VERDICT_STYLES = [
    "{tok}",
    "Conclusion: {tok}",
    "Therefore the project is {tok}.",
    "**{tok}**",
    "{up}",
    "Final answer: {tok}\n\nLet me know if you need more detail.",
]


def valid_case(i: int) -> tuple[str, dict[str, int], Verdict]:
    rng = random.Random(f"parser-case-{i}")
    scores = {cid: rng.randint(0, 5) for cid in CRITERION_IDS}
    verdict = rng.choice(list(Verdict))
    style = LINE_STYLES[i % len(LINE_STYLES)]
    order = list(CRITERION_IDS)
    if i % 3 == 1:
        rng.shuffle(order)
    lines = []
    for n, cid in enumerate(order, start=1):
        if i % 5 == 2 and cid in ("CH01", "CO01", "IN01", "PR01"):
            lines.append({"CH": "Characters", "CO": "Content", "IN": "Instructions", "PR": "Programming"}[cid[:2]] + ":")
        lines.append(style.format(id=cid, lid=cid.lower(), s=scores[cid], n=n))
        if i % 7 == 3:
            lines.append(f"   The project gives little evidence for {cid}.")
    body = ("\n\n" if i % 4 == 3 else "\n").join(lines)
    if i % 6 == 5:
        body = "```\n" + body + "\n```"
    if i % 8 == 6:
        # a mention of another token before the real conclusion
        body = "Some might say @boy@ at first glance, but look closer.\n" + body
    tail = VERDICT_STYLES[i % len(VERDICT_STYLES)].format(tok=verdict.token, up=verdict.token.upper())
    text = PREAMBLES[i % len(PREAMBLES)] + body + "\n\n" + tail
    if i % 9 == 4:
        text = text.replace("\n", "\r\n")
    return text, scores, verdict


VALID_CASES = [valid_case(i) for i in range(50)]

_NOISE = ["", " ", "\n", ":", "@", "@boy", "girl@", "**", "CH0", "9", "-1", "\x00", "é", "🙂", "\t", "CO02: 7", "PR04: 3"]


def fuzz_inputs(n: int = 10_000, seed: int = 99):
    rng = random.Random(seed)
    for k in range(n):
        text, _, _ = VALID_CASES[k % len(VALID_CASES)]
        mode = k % 6
        if mode == 0:
            yield text[: rng.randrange(len(text) + 1)]
        elif mode == 1:
            chars = list(text)
            for _ in range(rng.randint(1, 20)):
                if chars:
                    del chars[rng.randrange(len(chars))]
            yield "".join(chars)
        elif mode == 2:
            chars = list(text)
            for _ in range(rng.randint(1, 20)):
                chars.insert(rng.randrange(len(chars) + 1), rng.choice(_NOISE))
            yield "".join(chars)
        elif mode == 3:
            lines = text.splitlines()
            rng.shuffle(lines)
            yield "\n".join(lines[: rng.randrange(len(lines) + 1)])
        elif mode == 4:
            yield bytes(rng.randrange(256) for _ in range(rng.randrange(200))).decode("latin-1")
        else:
            yield "".join(rng.choice(_NOISE) for _ in range(rng.randrange(60)))
