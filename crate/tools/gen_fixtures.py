#!/usr/bin/env python3
"""Regenerates the offline fixtures under fixtures/.

Pages are synthetic stand-ins for the live sites. Run from the repository
root; output is deterministic.
"""
import hashlib
import json
import os
import shutil
from xml.sax.saxutils import quoteattr

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
FETCHED_AT = 1760000000

PIECES = [
    ("Toxodon", "A heavy hoofed grazer with a barrel body and teeth that never stopped growing."),
    ("Glyptodon", "An armoured relative of armadillos, its domed shell built from hundreds of bony plates."),
    ("Megatherium", "A ground sloth the size of an elephant that could rear up to browse high branches."),
    ("Macrauchenia", "A long-necked browser whose nostrils sat high on the skull, puzzling early naturalists."),
    ("Mylodon", "A ground sloth with small bony nodules set into its hide like chain mail."),
    ("Scelidotherium", "A slender-snouted ground sloth, probably a digger of roots and tubers."),
    ("Lestodon", "One of the largest ground sloths of the pampas, with broad shovel-like lips."),
    ("Doedicurus", "A glyptodont whose tail ended in a spiked club used in contests between rivals."),
    ("Panochthus", "A glyptodont with a rosette-patterned shell and a tail sheathed in rings."),
    ("Smilodon", "A sabre-toothed cat that hunted the large grazers of the plains."),
    ("Hippidion", "A short-legged horse with a long nasal notch, native to the Americas."),
    ("Stegomastodon", "A gomphothere with upward-curving tusks that roamed the southern grasslands."),
]

COLUMNS = [100, 366, 633, 900]
ROWS = [100, 300, 500]


def sha16(url):
    return hashlib.sha256(url.encode()).hexdigest()[:16]


def slug(name):
    return name.lower()


def wiki_url(name):
    return f"https://en.wikipedia.org/wiki/{name}"


def museum_url(name):
    return f"https://www.museo.fcnym.unlp.edu.ar/darwin/{slug(name)}"


def write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def wiki_page(name, desc):
    return f"""<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>{name} - Wikipedia</title></head>
<body class="mediawiki">
<div id="mw-page-base"></div>
<div id="content" class="mw-body">
<h1 id="firstHeading" class="firstHeading">{name}</h1>
<div id="bodyContent">
<div id="siteSub">From Wikipedia, the free encyclopedia</div>
<div id="mw-content-text" class="mw-body-content">
<div class="mw-parser-output">
<p><b>{name}</b> is an extinct genus of South American mammal. {desc}</p>
<h2>Discovery</h2>
<p>Fossils were collected in the Pampas region during the nineteenth century.</p>
</div>
</div>
</div>
</div>
<div id="footer"><ul><li>Text is available under a free licence.</li></ul></div>
</body>
</html>
"""


def museum_page(name, desc):
    s = slug(name)
    return f"""<!DOCTYPE html>
<html lang="es">
<head><meta charset="utf-8"><title>{name} | Museo de La Plata</title></head>
<body>
<div id="main">
<article class="piece-page">
<h1 class="piece-title">{name}</h1>
<img class="piece" src="https://www.museo.fcnym.unlp.edu.ar/img/darwin/{s}.jpg" alt="{name}">
<p class="piece-desc">
    {desc}
    On display in the Darwin hall.
</p>
<p class="piece-meta">Pleistocene, Buenos Aires Province.</p>
</article>
</div>
</body>
</html>
"""


def positions():
    out = []
    for r, y in enumerate(ROWS):
        xs = COLUMNS if r % 2 == 0 else list(reversed(COLUMNS))
        out.extend((x, y) for x in xs)
    return out


def attrs(pairs):
    return " ".join(f"{k}={quoteattr(v)}" for k, v in sorted(pairs) if v is not None)


def museum_xml():
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    lines.append("<mowa-app " + attrs([
        ("filename", "darwin-tour.mowa.xml"), ("locale", "en"), ("name", "Darwin Tour"),
        ("ns", "org.mowa.darwintour"), ("version", "1")]) + ">")
    lines.append("  <context-types>")
    lines.append('    <context-type kind="location"/>')
    lines.append("  </context-types>")
    lines.append("  <sensors>")
    lines.append('    <sensor context-type="location" id="gps" kind="gps" radius-m="20"/>')
    lines.append('    <sensor context-type="location" id="qr" kind="qr"/>')
    lines.append("  </sensors>")
    lines.append('  <space height="600" image="https://www.museo.fcnym.unlp.edu.ar/img/darwin/floorplan.png" kind="floorplan" width="1000">')
    for i, ((name, _), (x, y)) in enumerate(zip(PIECES, positions()), start=1):
        lines.append("    <poi " + attrs([
            ("code", f"http://en.qrwp.org/{name}"), ("id", f"p{i}"), ("name", name),
            ("order", str(i)), ("target-url", wiki_url(name)), ("x", str(x)), ("y", str(y))]) + ">")
        lines.append("      <prop " + attrs([
            ("mode", "text"), ("name", "poi-desc"), ("source", "extract"),
            ("url", museum_url(name)), ("xpath", "//p[@class='piece-desc']")]) + "/>")
        lines.append("      <prop " + attrs([
            ("mode", "attr:src"), ("name", "poi-pic"), ("source", "extract"),
            ("url", museum_url(name)), ("xpath", "//img[@class='piece']")]) + "/>")
        lines.append("    </poi>")
    for i in range(1, len(PIECES)):
        lines.append(f'    <link from="p{i}" to="p{i + 1}"/>')
    lines.append("  </space>")
    lines.append("  <layers>")
    lines.append('    <layer id="tour" target="url" value="poi:target-url">')
    lines.append("      <augmenter " + attrs([
        ("anchor", "//div[@id='mw-content-text']"), ("kind", "poi-info-panel"), ("position", "first_child")]) + ">")
    lines.append('        <param bind="poi.prop:poi-desc" name="description"/>')
    lines.append('        <param bind="poi.prop:poi-pic" name="image-url"/>')
    lines.append('        <param bind="poi.name" name="title"/>')
    lines.append("      </augmenter>")
    lines.append("      <augmenter " + attrs([
        ("anchor", "//h1[@id='firstHeading']"), ("kind", "hypermedia-nav"), ("position", "after")]) + "/>")
    lines.append("    </layer>")
    lines.append("  </layers>")
    lines.append("  <rules>")
    lines.append('    <rule layer="tour" sensor="gps"/>')
    lines.append('    <rule layer="tour" sensor="qr"/>')
    lines.append("  </rules>")
    lines.append("</mowa-app>")
    return "\n".join(lines) + "\n"


def qr(t, name):
    return json.dumps({"t": t, "kind": "qr", "payload": f"http://en.qrwp.org/{name}"})


def museum():
    base = os.path.join(ROOT, "museum")
    shutil.rmtree(base, ignore_errors=True)
    manifest, index = {}, {}
    for name, desc in PIECES:
        rel = f"pages/{slug(name)}.html"
        write(os.path.join(base, "corpus", rel), wiki_page(name, desc))
        manifest[wiki_url(name)] = rel
        url = museum_url(name)
        rel = f"pages/{sha16(url)}.html"
        write(os.path.join(base, "cache", rel), museum_page(name, desc))
        index[url] = {"file": rel, "fetched_at": FETCHED_AT}
    write(os.path.join(base, "corpus", "manifest.json"), json.dumps(manifest, indent=2) + "\n")
    write(os.path.join(base, "cache", "index.json"), json.dumps(index, indent=2) + "\n")
    write(os.path.join(base, "museum.mowa.xml"), museum_xml())
    names = [n for n, _ in PIECES]
    write(os.path.join(base, "traces", "in_order.jsonl"),
          "".join(qr(60000 * i, n) + "\n" for i, n in enumerate(names)))
    shuffled = [names[0], names[2], names[1], names[2]]
    write(os.path.join(base, "traces", "out_of_order.jsonl"),
          "".join(qr(60000 * i, n) + "\n" for i, n in enumerate(shuffled)))
    rubric = {
        "reference": "museum.mowa.xml",
        "expected_poi_count": 12,
        "expected_link_count": 11,
        "required_props": ["poi-desc", "poi-pic"],
        "tolerance": 0.05,
        "corpus": "corpus",
        "cache": "cache",
    }
    write(os.path.join(base, "rubric.json"), json.dumps(rubric, indent=2) + "\n")


VIDEO_URL = "https://www.youtube.com/watch?v=mowa-demo"


def noise():
    base = os.path.join(ROOT, "noise")
    shutil.rmtree(base, ignore_errors=True)
    page = """<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>Museum walkthrough - YouTube</title></head>
<body>
<div id="player-container">
<video id="player" src="https://www.youtube.com/media/mowa-demo.mp4" controls></video>
</div>
<h1 class="title">Museum walkthrough</h1>
<div id="description"><p>A short walk through the Darwin hall.</p></div>
</body>
</html>
"""
    write(os.path.join(base, "corpus", "pages", "video.html"), page)
    write(os.path.join(base, "corpus", "manifest.json"), json.dumps({VIDEO_URL: "pages/video.html"}, indent=2) + "\n")
    xml = """<?xml version="1.0" encoding="UTF-8"?>
<mowa-app filename="noise-aware-video.mowa.xml" locale="en" name="Noise Aware Video" ns="org.mowa.noiseawarevideo" version="1">
  <context-types>
    <context-type kind="noise"/>
  </context-types>
  <sensors>
    <sensor context-type="noise" id="db" kind="db"/>
  </sensors>
  <space kind="scalar_scale">
    <band id="quiet" label="Quiet" max="40" min="0" units="dB"/>
    <band id="normal" label="Normal" max="70" min="40" units="dB"/>
    <band id="noisy" label="Noisy" max="140" min="70" units="dB"/>
  </space>
  <layers>
    <layer id="volume" target="pattern" value="https://www.youtube.com/*">
      <augmenter anchor="//video" kind="media-volume-adapter" position="after">
        <param name="media-xpath" value="//video"/>
        <param name="volume:noisy" value="0.9"/>
        <param name="volume:normal" value="0.6"/>
        <param name="volume:quiet" value="0.3"/>
      </augmenter>
      <augmenter anchor="//h1[@class='title']" kind="scalar-badge" position="after">
        <param name="label-prefix" value="Noise:"/>
      </augmenter>
    </layer>
  </layers>
  <rules>
    <rule layer="volume" sensor="db"/>
  </rules>
</mowa-app>
"""
    write(os.path.join(base, "noise.mowa.xml"), xml)
    events = [json.dumps({"t": 0, "kind": "nav", "url": VIDEO_URL})]
    for i, v in enumerate([30, 35, 80, 85, 50, 20], start=1):
        events.append(json.dumps({"t": 1000 * i, "kind": "scalar", "sensor": "db", "value": v}))
    write(os.path.join(base, "traces", "db.jsonl"), "\n".join(events) + "\n")


# Grading cells per participant: a, b, c, d, e.
COHORT_CELLS = [
    (.98, .50, .50, 1, 1), (1, 1, 1, 1, 1), (.71, .71, .92, 1, 1), (1, 1, 1, 1, .80),
    (.33, .17, .17, .33, .30), (1, 0, 0, 1, 1), (.58, .58, 1, 1, 1), (.92, .92, .92, .92, .50),
    (1, 1, 1, 1, .70), (.67, .33, .33, .67, .50), (1, 1, 1, 1, 1), (.54, .54, 1, 1, 1),
    (1, 1, 1, 1, 1), (1, .83, .83, 1, 1), (1, 1, 1, 1, .60), (1, 1, 1, 1, .70),
    (.85, .88, .92, .88, .70), (1, 1, 1, 1, 1), (1, 1, 1, 1, 1), (1, .54, 1, 1, 1), (1, 1, 1, 1, 1),
]
PRINTED_R1 = [.74, 1, .71, 1, .25, .50, .58, .92, 1, .50, 1, .54, 1, .92, 1, 1, .87, 1, 1, .77, 1]
PRINTED_R23 = [.83, 1, .97, .93, .27, .67, 1, .78, .90, .50, 1, 1, 1, .94, .87, .90, .83, 1, 1, 1, 1]
PRINTED_SR = [.80, 1, .89, .96, .26, .61, .86, .83, .93, .50, 1, .85, 1, .93, .91, .93, .84, 1, 1, .92, 1]


def cohort():
    base = os.path.join(ROOT, "cohort")
    shutil.rmtree(base, ignore_errors=True)
    rows = ["participant,a,b,c,d,e,r1,r23,sr"]
    for i, cells in enumerate(COHORT_CELLS):
        a, b, c, d, e = (float(v) for v in cells)
        rows.append(",".join([str(i + 1)] + [f"{v:g}" for v in (a, b, c, d, e)]
                             + [f"{PRINTED_R1[i]:g}", f"{PRINTED_R23[i]:g}", f"{PRINTED_SR[i]:g}"]))
        r1 = (a + b) / 2.0
        r23 = (c + d + e) / 3.0
        report = {"label": str(i + 1), "a": a, "b": b, "c": c, "d": d, "e": e,
                  "r1": r1, "r23": r23, "sr": (r1 + 2.0 * r23) / 3.0}
        write(os.path.join(base, "reports", f"p{i + 1:02d}.json"), json.dumps(report, indent=2) + "\n")
    write(os.path.join(base, "cells.csv"), "\n".join(rows) + "\n")


if __name__ == "__main__":
    museum()
    noise()
    cohort()
