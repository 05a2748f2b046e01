#!/usr/bin/env python3
"""Regenerates data/fixture/lessons.jsonl and data/fixture/categories.jsonl.

Output is a pure function of SEED, so rerunning leaves the files byte-identical.
"""

import json
import pathlib
import random

SEED = 20240917
ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixture"

CLUSTERS = [
    {
        "name": "volcano",
        "terms": ["magma", "eruption", "volcano", "tectonic", "basalt", "crater", "lava", "mantle", "pressure",
                  "caldera", "ashfall", "geology"],
        "lessons": [
            ("How do volcanoes erupt?", ["eruption", "pressure", "gases"]),
            ("The secret life of lava flows", ["basalt", "viscosity", "cooling"]),
            ("Why Earth's plates keep moving", ["tectonic", "convection", "subduction"]),
            ("What lies beneath a supervolcano", ["caldera", "reservoir", "ashfall"]),
        ],
    },
    {
        "name": "bees",
        "terms": ["honeybee", "pollen", "nectar", "colony", "flowers", "pollination", "hive", "queen", "workers",
                  "foraging", "orchard", "insects"],
        "lessons": [
            ("Why honeybees dance", ["foraging", "waggle", "direction"]),
            ("The hidden economy of pollination", ["orchard", "almonds", "farmers"]),
            ("Inside the mind of a bee colony", ["queen", "workers", "swarm"]),
            ("What happens when pollinators vanish", ["decline", "pesticides", "habitat"]),
        ],
    },
    {
        "name": "space",
        "terms": ["gravity", "galaxy", "telescope", "stars", "spacetime", "horizon", "quasar", "radiation",
                  "astronomers", "universe", "orbit", "light"],
        "lessons": [
            ("What is a black hole?", ["horizon", "collapse", "singularity"]),
            ("How telescopes see back in time", ["telescope", "redshift", "photons"]),
            ("The life cycle of stars", ["fusion", "supernova", "nebula"]),
            ("Why gravity bends light", ["spacetime", "lensing", "einstein"]),
        ],
    },
    {
        "name": "rome",
        "terms": ["empire", "senate", "legion", "emperor", "citizens", "republic", "aqueduct", "forum",
                  "provinces", "roads", "historians", "ancient"],
        "lessons": [
            ("How the Roman Republic fell", ["senate", "caesar", "dictator"]),
            ("The engineering of Roman aqueducts", ["aqueduct", "gradient", "concrete"]),
            ("Life as a Roman legionary", ["legion", "training", "frontier"]),
            ("Why Rome built roads everywhere", ["roads", "milestones", "trade"]),
        ],
    },
    {
        "name": "heart",
        "terms": ["heart", "blood", "arteries", "oxygen", "circulation", "veins", "muscle", "pulse",
                  "ventricle", "capillaries", "pressure", "cells"],
        "lessons": [
            ("How your heart pumps blood", ["ventricle", "valves", "rhythm"]),
            ("The journey of a red blood cell", ["hemoglobin", "capillaries", "oxygen"]),
            ("What causes a heart attack?", ["plaque", "arteries", "clotting"]),
            ("Why exercise strengthens the heart", ["exercise", "endurance", "muscle"]),
        ],
    },
]

# Templates use only short function words, so lessons share vocabulary through
# their topic terms and not through the sentence frames.
TEMPLATES = [
    "Now look at how {a} acts on {b}.",
    "This is why {a} and {b} go hand in hand.",
    "It is {a} that sets the pace of {b}.",
    "Some say {a} is the key to {b}, and they may be right.",
    "Here {a} and {b} meet, and {c} is the end result.",
    "Ask why {a} ever needs {b}.",
    "We can see {a} in {b}, and also in {c}.",
    "If {a} goes up, {b} has to move too.",
    "Few of us ever see {a} up close, yet {b} is all over.",
    "So {a} is not just {b}; it is also {c}.",
    "For a long time no one knew how {a} and {b} fit.",
    "Add {a} to {b} and you get {c}.",
    "Can {a} last with no {b} at all?",
    "Each bit of {a} adds to the {b}.",
]

FILLER = [
    "So what does this mean for us?",
    "Now for the fun part.",
    "But wait, we are not done.",
    "So how do we know?",
    "Here is the odd part.",
    "And that is not all.",
]


def slug(title):
    keep = "".join(ch.lower() if ch.isalnum() else "-" for ch in title)
    return "-".join(part for part in keep.split("-") if part)


def transcript(rng, cluster_terms, own_terms, title):
    sentences = [f"Let us ask: {title.rstrip('?')}?"]
    pool = own_terms * 3 + cluster_terms
    words = len(sentences[0].split())
    while words < 240:
        if rng.random() < 0.15:
            s = rng.choice(FILLER)
        else:
            a, b, c = rng.sample(pool, 3)
            s = rng.choice(TEMPLATES).format(a=a, b=b, c=c)
            s = s[0].upper() + s[1:]
        sentences.append(s)
        words += len(s.split())
    paragraphs = []
    for i in range(0, len(sentences), 5):
        paragraphs.append(" ".join(sentences[i:i + 5]))
    return "\n\n".join(paragraphs)


def only_links_text(others):
    lines = ["Watch these next:"]
    for lesson_id, title in others:
        lines.append(f"- [{title}](https://example.org/lessons/{lesson_id})")
    return "\n".join(lines)


def mainly_text_text(rng, terms, topic, link):
    body = []
    for _ in range(7):
        a, b, c = rng.sample(terms, 3)
        s = rng.choice(TEMPLATES).format(a=a, b=b, c=c)
        body.append(s[0].upper() + s[1:])
    para1 = " ".join(body[:4])
    para2 = " ".join(body[4:]) + f" A good starting point is [this overview of {topic}]({link})."
    return para1 + "\n\n" + para2


def paragraphs_with_links_text(rng, terms, links):
    paragraphs = []
    for label, url in links:
        body = []
        for _ in range(2):
            a, b, c = rng.sample(terms, 3)
            s = rng.choice(TEMPLATES).format(a=a, b=b, c=c)
            body.append(s[0].upper() + s[1:])
        paragraphs.append(" ".join(body) + f" Learn more in [{label}]({url}).")
    return "\n\n".join(paragraphs)


def build_lessons():
    rng = random.Random(SEED)
    lessons = []
    for ci, cluster in enumerate(CLUSTERS):
        for li, (title, own) in enumerate(cluster["lessons"]):
            lessons.append({
                "cluster": ci,
                "slot": li,
                "id": f"L{ci * 4 + li + 1:02d}",
                "title": title,
                "url": f"https://example.org/lessons/{slug(title)}",
                "transcript": transcript(rng, cluster["terms"], own, title),
                "own": own,
            })

    for lesson in lessons:
        mates = [m for m in lessons if m["cluster"] == lesson["cluster"] and m["id"] != lesson["id"]]
        # The last lesson of every cluster has no on-site recommendations.
        if lesson["slot"] == 3:
            lesson["gold_links"] = []
        else:
            count = 1 + (lesson["slot"] % 3)
            lesson["gold_links"] = [m["id"] for m in mates[:count]]

        terms = CLUSTERS[lesson["cluster"]]["terms"] + lesson["own"]
        kind = lesson["slot"]
        if kind == 0:
            lesson["dig_deeper_text"] = only_links_text([(m["id"], m["title"]) for m in mates[:3]])
        elif kind == 1:
            lesson["dig_deeper_text"] = mainly_text_text(
                rng, terms, CLUSTERS[lesson["cluster"]]["name"],
                f"https://example.org/articles/{CLUSTERS[lesson['cluster']]['name']}")
        elif kind == 2:
            lesson["dig_deeper_text"] = paragraphs_with_links_text(
                rng, terms, [(m["title"], m["url"]) for m in mates[:3]])
    return lessons


CATEGORY_EXAMPLES = [
    ("links-short-list", "only_links",
     "Watch these: [Volcano basics](https://example.org/a) [Plate tectonics](https://example.org/b)"),
    ("links-bulleted", "only_links",
     "More to explore:\n\n- [How bees see color](https://example.org/c)\n- [The waggle dance](https://example.org/d)\n"
     "- [Pollination economics](https://example.org/e)\n- https://example.org/f"),
    ("links-with-captions", "only_links",
     "Curious about black holes? Start here: https://example.org/g\n\n"
     "Then try [Gravity explained](https://example.org/h) and [Light and time](https://example.org/i)."),
    ("text-no-links", "mainly_text",
     "The Roman road network stretched for tens of thousands of miles, linking distant provinces to the capital. "
     "Engineers laid foundations of packed gravel and sand, then topped them with tightly fitted stones so that "
     "rain would drain to the sides. Milestones recorded distances and the names of the officials who paid for "
     "repairs. Armies marched along these roads, but so did merchants, letters, and ideas, which is why historians "
     "often describe the roads as the nervous system of the empire."),
    ("text-one-link", "mainly_text",
     "Your heart beats around one hundred thousand times every day without you ever thinking about it. Each beat "
     "begins with an electrical signal from a small cluster of cells in the right atrium, which spreads across the "
     "muscle and makes the chambers contract in sequence. Valves snap shut behind the blood to keep it moving in one "
     "direction only.\n\nIf you want to see the signal itself, look at [a recording of an electrocardiogram]"
     "(https://example.org/ecg) and try to match each wave to a stage of the heartbeat."),
    ("text-two-links", "mainly_text",
     "Stars spend most of their lives fusing hydrogen into helium in their cores, balancing the inward pull of "
     "gravity against the outward push of radiation. When the hydrogen runs low, that balance fails and the star "
     "begins to change, swelling into a giant or collapsing into something far denser. The mass of the star decides "
     "which path it takes and how dramatic the ending will be. Read about [stellar nurseries](https://example.org/n) "
     "and [supernova remnants](https://example.org/s) to follow the whole cycle."),
    ("paragraphs-three-links", "paragraphs_with_links",
     "Honeybees communicate the location of food with a dance that encodes both direction and distance. The angle "
     "of the dance relative to vertical matches the angle between the sun and the flowers. "
     "[Watch a waggle dance decoded](https://example.org/w1).\n\n"
     "Colonies also make collective decisions when they swarm, sending scouts to inspect possible new homes and "
     "voting by dancing. [Read about swarm democracy](https://example.org/w2).\n\n"
     "Finally, the health of a colony depends on the flowers around it, which is why habitat loss matters so much "
     "for beekeepers. [See a map of pollinator decline](https://example.org/w3)."),
    ("paragraphs-four-links", "paragraphs_with_links",
     "Aqueducts carried water across valleys using nothing but a gentle downhill gradient, sometimes just a few "
     "centimeters per hundred meters. [Explore the Pont du Gard](https://example.org/p1) and "
     "[compare it with Segovia](https://example.org/p2).\n\n"
     "Roman concrete was another secret of their success, and modern chemists are still studying why some harbor "
     "structures have lasted two thousand years in seawater. [A chemist explains](https://example.org/p3).\n\n"
     "For a wider view of how water shaped Roman cities, including baths and fountains, visit "
     "https://example.org/p4."),
    ("paragraphs-bare-urls", "paragraphs_with_links",
     "Earthquakes and volcanoes cluster along the edges of tectonic plates, and a live map makes that pattern "
     "obvious within minutes: https://example.org/q1\n\n"
     "The mantle beneath the plates moves slowly, driven by heat from deep inside the planet, and geologists use "
     "seismic waves to image it. A good introduction is https://example.org/q2 and a more detailed one is "
     "https://example.org/q3 for readers who want the equations behind the pictures and the history of the idea."),
]


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    with open(ROOT / "lessons.jsonl", "w", encoding="utf-8", newline="\n") as out:
        for lesson in build_lessons():
            record = {k: lesson[k] for k in ("id", "title", "url", "transcript")}
            if "dig_deeper_text" in lesson:
                record["dig_deeper_text"] = lesson["dig_deeper_text"]
            record["gold_links"] = lesson["gold_links"]
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(ROOT / "categories.jsonl", "w", encoding="utf-8", newline="\n") as out:
        for name, category, text in CATEGORY_EXAMPLES:
            out.write(json.dumps({"name": name, "category": category, "text": text}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
