#!/usr/bin/env python3
"""Independent re-computation of the fixture predictions.

Reads the raw fixture files and the hand-annotated alignments, applies the
weighted multilingual average directly, and writes the golden prediction
files. Nothing here shares code with the C++ implementation.

usage: hand_trace.py <fixtures dir> <out dir> [alpha beta lang...]
"""

import json
import math
import sys
import unicodedata
from hashlib import sha256
from pathlib import Path

import numpy as np


def strip_markup(raw):
    text, spans, i = "", [], 0
    while i < len(raw):
        if raw.startswith("<strong>", i):
            j = raw.index("</strong>", i)
            start = len(text)
            text += raw[i + 8:j]
            spans.append((start, len(text)))
            i = j + 9
        else:
            text += raw[i]
            i += 1
    assert len(spans) == 2
    return text, spans


def load_instances(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    head = lines[0].split("\t")
    out = []
    for line in lines[1:]:
        row = dict(zip(head, line.split("\t")))
        inst = {"id": row["id"], "word1": row["word1"], "word2": row["word2"], "ctx": {}}
        for m in (1, 2):
            text, spans = strip_markup(row[f"context{m}"])
            a, b = spans
            # The mark whose text starts like word1 is word1's.
            if not text[a[0]:a[1]].lower().startswith(row["word1"][:3].lower()):
                a, b = b, a
            inst["ctx"][m] = (text, a, b)
        out.append(inst)
    return out


def load_cache(path):
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        r = json.loads(line)
        out[(r["tgt"], r["source_text"])] = r["translated_text"]
    return out


def load_vectors(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    out = {}
    for line in lines[1:]:
        parts = line.split(" ")
        out[parts[0].lower()] = np.array([np.float32(x) for x in parts[1:]], dtype=np.float64)
    return out


def load_encodings(path):
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        r = json.loads(line)
        key = (r["lang"], sha256(unicodedata.normalize("NFC", r["text"]).encode()).hexdigest())
        out[key] = r
    return out


def cosine(a, b):
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0 or nb == 0:
        return None
    return max(-1.0, min(1.0, float(a @ b) / (na * nb)))


def word_vector(enc, span):
    vecs = [np.array(t["vec"], dtype=np.float32).astype(np.float64)
            for t in enc["tokens"] if t["start"] < span[1] and span[0] < t["end"]]
    if not vecs:
        return None
    return sum(vecs) / len(vecs)


def locate(text, surface, occurrence):
    pos = -1
    for _ in range(occurrence):
        pos = text.index(surface, pos + 1)
    return (pos, pos + len(surface))


def channels(lang, text, span1, span2, vectors, encodings):
    we = bert = None
    if span1 and span2:
        v = vectors.get(lang, {})
        s1, s2 = text[span1[0]:span1[1]].lower(), text[span2[0]:span2[1]].lower()
        if s1 in v and s2 in v:
            we = cosine(v[s1], v[s2])
        enc = encodings[(lang, sha256(unicodedata.normalize("NFC", text).encode()).hexdigest())]
        a, b = word_vector(enc, span1), word_vector(enc, span2)
        if a is not None and b is not None:
            bert = cosine(a, b)
    return bert, we


def per_language(bert, we, alpha, beta):
    if bert is not None and we is not None:
        return alpha * bert + beta * we
    if bert is not None and alpha > 0:
        return bert
    if we is not None and beta > 0:
        return we
    return None


def main():
    fx, out = Path(sys.argv[1]), Path(sys.argv[2])
    alpha, beta = (float(sys.argv[3]), float(sys.argv[4])) if len(sys.argv) > 4 else (0.7, 0.3)
    extras = sys.argv[5:] if len(sys.argv) > 5 else ["it", "pt"]
    instances = load_instances(fx / "en_5.tsv")
    cache = load_cache(fx / "cache.jsonl")
    vectors = {l: load_vectors(fx / "vectors" / f"{l}.txt") for l in ("en", "it", "pt")}
    encodings = load_encodings(fx / "encoder.jsonl")
    trace = json.loads((fx / "hand_trace.json").read_text(encoding="utf-8"))

    sims = {}
    for inst in instances:
        pair = []
        for m in (1, 2):
            text, a, b = inst["ctx"][m]
            values = []
            v = per_language(*channels("en", text, a, b, vectors, encodings), alpha, beta)
            if v is not None:
                values.append(v)
            for lang in extras:
                translated = cache[(lang, text)]
                spans = [None if w is None else locate(translated, *w) for w in trace[inst["id"]][lang][str(m)]]
                v = per_language(*channels(lang, translated, spans[0], spans[1], vectors, encodings), alpha, beta)
                if v is not None:
                    values.append(v)
            pair.append(sum(values) / len(values))
        sims[inst["id"]] = pair

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions_subtask1.tsv", "w", encoding="utf-8") as f:
        f.write("id\tchange\n")
        for iid in sorted(sims):
            f.write(f"{iid}\t{sims[iid][1] - sims[iid][0]!r}\n")
    with open(out / "predictions_subtask2.tsv", "w", encoding="utf-8") as f:
        f.write("id\tsim_context1\tsim_context2\n")
        for iid in sorted(sims):
            f.write(f"{iid}\t{sims[iid][0]!r}\t{sims[iid][1]!r}\n")


if __name__ == "__main__":
    main()
