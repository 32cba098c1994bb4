"""Regenerate the checked-in LLM transcript fixtures.

The transcripts are authored, not recorded: each response is written so that
its expected classification is known by construction. Run from the repo root.
"""

import json
import random
from pathlib import Path

from metrovqa.nlq.llm import build_llm_prompt, classify_response, prompt_digest
from metrovqa.nlq.templates import get_template, instantiate_template

OUT = Path("src/metrovqa/data/llm_fixtures.json")

# per template: (bindings, a paraphrase not covered by the regex grammar)
CASES = {
    1: (("Dorava", "Kelumi"), "What number of stops separate Dorava from Kelumi?"),
    2: (("Mirosa",), "Within two hops of Mirosa, how many stations are there?"),
    3: (("Tavuno", "Besaki"), "Count all routes from Tavuno to Besaki."),
    4: (("Pelomi",), "Is Pelomi on some loop of the network?"),
    5: (("Rikatu", "Sonebo"), "Do Rikatu and Sonebo border each other directly?"),
    6: (("Fanuro", "Giledo"), "Which stop neighbours both Fanuro and Giledo?"),
    7: (("Havemi", "Jorupa"), "Is some station a neighbour of Havemi as well as Jorupa?"),
    8: (("Lubato",), "Does the map contain Lubato?"),
    9: (("Vesiko",), "Name the lines serving Vesiko."),
    10: (("Wadoru",), "On how many lines can you board at Wadoru?"),
    11: (("Zenabi", "Cuporo"), "Can one line take me from Zenabi to Cuporo?"),
    12: (("Nomira",), "List the stops along Nomira."),
}


def wrong_program(tid, bindings):
    """A plausible but incorrect parse: a neighbouring template or a wrong name."""
    t = get_template(tid)
    others = [u for u in range(1, 13) if get_template(u).arity == t.arity
              and get_template(u).arg_kind == t.arg_kind and u != tid]
    if others:
        return get_template(others[0]).program([b.lower() for b in bindings]).text()
    return t.program([bindings[0].lower() + "x", *[b.lower() for b in bindings[1:]]]).text()


def main():
    rng = random.Random(7)
    rows = []
    for tid, (bindings, paraphrase) in CASES.items():
        t = get_template(tid)
        expected = t.program([b.lower() for b in bindings])
        atoms_as_written = expected.text(quote=True)
        spaced = expected.text(sep="\n")
        plain = instantiate_template(tid, bindings)
        variants = [
            ("full_match", plain, atoms_as_written),
            ("contains_solution", paraphrase,
             rng.choice(["Sure! Here is the parsed question:\n", "The ground truths are:\n```\n"])
             + spaced + rng.choice(["\nLet me know if you need anything else.", "\n```"])),
            ("task_missed", "Quick question: " + plain[0].lower() + plain[1:],
             rng.choice(["", "Answer: "]) + wrong_program(tid, bindings)
             if tid % 3 else "I cannot determine this without seeing the map."),
            ("no_answer", paraphrase[:-1] + ", please?", rng.choice(["", " ", "\n"])),
        ]
        for category, question, response in variants:
            prompt = build_llm_prompt(question)
            got = classify_response(response, expected).category
            assert got == category, (tid, category, got, response)
            rows.append({
                "template_id": tid,
                "question": question,
                "expected": expected.text(),
                "prompt_sha256": prompt_digest(prompt),
                "response": response,
                "category": category,
            })
    assert len({r["prompt_sha256"] for r in rows}) == len(rows), "prompts must be distinct for replay"
    OUT.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} transcripts to {OUT}")


if __name__ == "__main__":
    main()
