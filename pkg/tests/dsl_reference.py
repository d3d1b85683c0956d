"""Independent reference evaluator and random generators for rule tests."""

import random

VOCAB = ["asap", "kabut", "api", "#saveriau", "paru-paru", "mata", "titik", "hutan", "x1", "Riau"]
PUNCT = [" ", " ", " ", ", ", ". ", "! ", "; ", " (", ") ", "/", "?"]


def ref_tokens(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum() or ch in "#-":
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def ref_eval(node, toks):
    """node: ("p", [words]) | ("and", [children]) | ("or", [children])."""
    kind, body = node
    if kind == "p":
        n = len(body)
        return any(toks[i:i + n] == body for i in range(len(toks) - n + 1))
    results = [ref_eval(c, toks) for c in body]
    return all(results) if kind == "and" else any(results)


def random_tree(rng, depth=0):
    if depth >= 3 or rng.random() < 0.35:
        n = 1 if rng.random() < 0.7 else 2
        return ("p", [rng.choice(VOCAB).lower() for _ in range(n)])
    kind = rng.choice(["and", "or"])
    return (kind, [random_tree(rng, depth + 1) for _ in range(rng.randint(2, 3))])


def to_source(node, rng):
    kind, body = node
    if kind == "p":
        return " ".join(w.upper() if rng.random() < 0.2 else w for w in body)
    op = " && " if kind == "and" else rng.choice([" || ", " OR ", "||"])
    return op.join("(" + to_source(c, rng) + ")" if c[0] != "p" else to_source(c, rng) for c in body)


def random_text(rng):
    words = [rng.choice(VOCAB) for _ in range(rng.randint(0, 8))]
    out = []
    for w in words:
        out.append(w.upper() if rng.random() < 0.2 else w)
        out.append(rng.choice(PUNCT))
    return "".join(out)


def random_pairs(seed, n):
    rng = random.Random(seed)
    return [(to_source(t := random_tree(rng), rng), t, random_text(rng)) for _ in range(n)]
