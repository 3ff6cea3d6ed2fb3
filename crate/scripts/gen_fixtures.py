#!/usr/bin/env python3
"""Generate the deterministic fixture world under crates/core/fixtures.

The world has a seed knowledge base, a registry of trial records served by
the fixture registry, one website per company (plus a later "v2" overlay
with changed pages and updated records) and gold tables for evaluation.

Gold values are computed here from the generator's own ground truth, never
by running the Rust code. Re-running the script reproduces the same files.

Usage: python3 scripts/gen_fixtures.py
"""

import json
import random
import shutil
from datetime import date, timedelta
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1] / "crates" / "core" / "fixtures"
SEED = 20240611
rng = random.Random(SEED)

# Ground truth for phone numbers: (calling code, trunk prefix, allowed
# national lengths). Kept separate from the crate's bundled rules so the
# gold table is an independent oracle.
PHONE_TRUTH = {
    "CH": ("41", "0", [9]),
    "DE": ("49", "0", [7, 8, 9, 10, 11]),
    "AT": ("43", "0", [7, 8, 9, 10, 11, 12, 13]),
    "FR": ("33", "0", [9]),
    "GB": ("44", "0", [9, 10]),
    "US": ("1", "1", [10]),
}

CITY = {
    "CH": [("Chur", "7000"), ("Basel", "4051"), ("Zürich", "8005"), ("Lausanne", "1015")],
    "DE": [("Berlin", "10115"), ("München", "80331"), ("Heidelberg", "69117"), ("Mainz", "55116")],
    "AT": [("Wien", "1030"), ("Graz", "8010"), ("Innsbruck", "6020")],
    "FR": [("Paris", "75013"), ("Lyon", "69007"), ("Strasbourg", "67000")],
    "GB": [("Cambridge", "CB2 1TN"), ("Oxford", "OX4 2JZ"), ("London", "NW1 2BE")],
    "US": [("Boston", "MA 02139"), ("San Diego", "CA 92121"), ("Princeton", "NJ 08540")],
}

SUFFIX = {"CH": "AG", "DE": "GmbH", "AT": "GmbH", "FR": "SA", "GB": "Ltd", "US": "Inc"}

AMBIGUOUS = ["Apex", "Helix", "Orion", "Meridian", "Zenith", "Atlas",
             "Vega", "Sirius", "Titan", "Lumen", "Aurora", "Summit"]
BIO_WORDS = ["Biosciences", "Therapeutics", "Biologics", "Oncology", "Genomics", "Biopharma"]
# Non-biotech twins come in pairs sharing a domain tag so that each can be
# disambiguated by mentioning the other.
NONBIO = [("Freight", "logistics"), ("Logistics", "logistics"),
          ("Software", "software"), ("Systems", "software"),
          ("Capital", "finance"), ("Investments", "finance"),
          ("Motors", "automotive"), ("Mobility", "automotive"),
          ("Energy", "energy"), ("Power", "energy"),
          ("Foods", "food"), ("Dairy", "food")]

UNIQUE = [
    ("Novagenix AG", "CH", "biotech", "NVX"), ("Cellvara Therapeutics Inc", "US", "biotech", None),
    ("Immunora SA", "FR", "biotech", None), ("Genoptix Biologics GmbH", "DE", "biotech", None),
    ("Virexa Pharma AG", "CH", "pharma", None), ("Oncolyte Ltd", "GB", "biotech", None),
    ("Neurabridge Inc", "US", "biotech", None), ("Cardiomend GmbH", "AT", "medtech", None),
    ("Dermavita SA", "FR", "pharma", None), ("Hepatrix Ltd", "GB", "biotech", None),
    ("Myelonix AG", "CH", "biotech", None), ("Retinova GmbH", "DE", "biotech", None),
    ("Synaptica Inc", "US", "biotech", None), ("Thymoral SA", "FR", "pharma", None),
    ("Vasculon Medical GmbH", "AT", "medtech", None), ("Osteogenic Ltd", "GB", "medtech", None),
    ("Pulmoxa AG", "CH", "pharma", None), ("Renalytix Pharma Inc", "US", "pharma", "RLX"),
    ("Glycora GmbH", "DE", "biotech", None), ("Proteonica SA", "FR", "biotech", None),
    ("Kinexa Biotech AG", "CH", "biotech", None), ("Ribotecta Ltd", "GB", "biotech", None),
    ("Lymphora Inc", "US", "biotech", None), ("Biotène Santé SA", "FR", "pharma", None),
    ("Corvanta GmbH", "DE", "medtech", None), ("Endocrix AG", "CH", "pharma", None),
    ("Fibronex Ltd", "GB", "biotech", None), ("Allergenix GmbH", "AT", "pharma", None),
    ("Vironexa Inc", "US", "biotech", None), ("Stemaris AG", "CH", "biotech", "STX"),
    ("Nephrolis SA", "FR", "pharma", None), ("Epigenta GmbH", "DE", "biotech", None),
    ("Mucosal Dynamics Ltd", "GB", "biotech", None), ("Peptilon Inc", "US", "pharma", None),
    ("Hemagen Labs AG", "CH", "medtech", None), ("Xenotropa GmbH", "DE", "biotech", None),
]

FIRST = ["Anna", "Lukas", "Sophie", "Jonas", "Clara", "Felix", "Laura", "David", "Marie", "Simon",
         "Julia", "Martin", "Elena", "Thomas", "Sarah", "Daniel", "Nora", "Peter", "Lea", "Michael",
         "Hannah", "Stefan", "Emily", "James", "Olivia", "Pierre", "Camille", "Jürgen", "Chloé",
         "Robert", "Grace", "Henrik", "Isabel", "Oliver", "Katrin", "Matteo", "Ingrid", "Samuel"]
LAST = ["Keller", "Brunner", "Meier", "Fischer", "Weber", "Schmid", "Huber", "Wagner", "Baumann",
        "Lambert", "Moreau", "Dubois", "Bennett", "Harper", "Collins", "Turner", "Whitfield",
        "Hartmann", "Vogel", "Böhm", "Lindqvist", "Rossi", "Marchetti", "Okafor", "Novak", "Sandoval",
        "Kowalski", "Haldane", "Petrov", "Castellano", "Fontaine", "Ellison", "Nakamura", "Brandt",
        "Zeller", "Lorenz", "Gerber", "Ashworth", "Mercier", "Dalton"]

KEY_TITLES = ["Chief Financial Officer", "Chief Business Officer", "Chief Medical Officer", "Chief Scientific Officer",
              "Chief Operating Officer", "Chairman of the Board", "Board Member", "Member of the Board"]
STAFF_TITLES = ["Head of Clinical Operations", "Director, Regulatory Affairs", "Office Manager",
                "Senior Scientist", "Head of Quality Assurance"]

CONDITIONS = ["Psoriasis", "Type 2 Diabetes", "Non-Small Cell Lung Cancer", "Rheumatoid Arthritis",
              "Multiple Sclerosis", "Chronic Kidney Disease", "Heart Failure", "Asthma",
              "Atopic Dermatitis", "Alzheimer Disease", "Hepatitis B", "Ulcerative Colitis",
              "Osteoporosis", "Migraine", "Acute Myeloid Leukemia", "Cystic Fibrosis"]
STATUSES = ["Recruiting", "Active, not recruiting", "Completed", "Completed", "Terminated",
            "Withdrawn", "Not yet recruiting", "Unknown status", "Ongoing", "Prematurely Ended"]
UNIVERSITIES = ["University Hospital Basel", "Charité Universitätsmedizin Berlin",
                "Medical University of Vienna", "Institut Curie", "University of Oxford",
                "Dana-Farber Cancer Institute"]


def strip_suffix(name):
    toks = name.split()
    while len(toks) > 1 and toks[-1].rstrip(".") in {"AG", "GmbH", "Inc", "Ltd", "SA"}:
        toks.pop()
    return " ".join(toks)


def slug(name):
    import unicodedata
    base = unicodedata.normalize("NFD", strip_suffix(name))
    base = "".join(c for c in base if not unicodedata.combining(c)).lower()
    return "".join(c for c in base if c.isalnum())


def fmt_id(prefix, n):
    return f"{prefix}-{n:05d}"


# ---------------------------------------------------------------- companies

def build_companies():
    companies = []
    bio_words = list(BIO_WORDS)
    countries = list(PHONE_TRUTH)
    for i, word in enumerate(AMBIGUOUS):
        country = countries[i % len(countries)]
        bio_name = f"{word} {bio_words[i % len(bio_words)]} {SUFFIX[country]}"
        companies.append(dict(name=bio_name, country=country, tags=["biotech"], aliases=[word],
                              bio=True, twin=word))
        nb_word, tag = NONBIO[i]
        nb_country = countries[(i + 2) % len(countries)]
        companies.append(dict(name=f"{word} {nb_word} {SUFFIX[nb_country]}", country=nb_country,
                              tags=[tag], aliases=[word], bio=False, twin=word))
    for name, country, tag, alias in UNIQUE:
        companies.append(dict(name=name, country=country, tags=[tag],
                              aliases=[alias] if alias else [], bio=True, twin=None))
    for n, c in enumerate(companies, start=1):
        c["id"] = fmt_id("co", n)
        c["term"] = strip_suffix(c["name"])
        c["slug"] = slug(c["name"])
        # Non-biotech companies alternate between having a website or not.
        has_site = c["bio"] or n % 4 == 0
        c["host"] = f"www.{c['slug']}.test" if has_site else None
    terms = [c["term"].lower() for c in companies]
    for c in companies:
        for other in companies:
            if other is not c:
                assert c["term"].lower() not in other["name"].lower(), (c["term"], other["name"])
    assert len(set(terms)) == len(terms)
    return companies


# ------------------------------------------------------------------- phones

def phone_digits(country, r):
    cc, trunk, lengths = PHONE_TRUTH[country]
    if country == "US":
        return str(r.choice([415, 617, 858, 609])) + "555" + f"{r.randrange(100, 199):04d}"
    if country == "CH":
        return str(r.choice([81, 61, 44, 21])) + f"{r.randrange(1000000, 9999999)}"
    if country == "DE":
        return str(r.choice([30, 89, 6221, 6131])) + f"{r.randrange(100000, 999999)}"
    if country == "AT":
        return str(r.choice([1, 316, 512])) + f"{r.randrange(1000000, 9999999)}"
    if country == "FR":
        return str(r.choice([1, 4, 3])) + f"{r.randrange(10000000, 99999999)}"
    return "20" + f"{r.randrange(10000000, 99999999)}"


def e164(country, national):
    return "+" + PHONE_TRUTH[country][0] + national


def group(digits, sizes):
    out, i = [], 0
    for s in sizes:
        out.append(digits[i:i + s])
        i += s
    if i < len(digits):
        out.append(digits[i:])
    return " ".join(x for x in out if x)


def display_phone(country, national, style):
    cc, trunk, _ = PHONE_TRUTH[country]
    if country == "US":
        a, b, c = national[:3], national[3:6], national[6:]
        return {"intl": f"+1 ({a}) {b}-{c}", "national": f"({a}) {b}-{c}",
                "trunk0": f"+1 {a} {b} {c}", "double0": f"001 {a} {b} {c}"}[style]
    sizes = [2, 3, 2, 2] if len(national) == 9 else [3, 3, 4]
    body = group(national, sizes)
    return {"intl": f"+{cc} {body}", "national": f"{trunk}{body}",
            "trunk0": f"+{cc} ({trunk}){body}", "double0": f"00{cc} {body}"}[style]


def validate_phone(country_hint, raw):
    """Independent oracle: E.164 for `raw`, or None when invalid."""
    s = raw.strip()
    intl = s.startswith("+") or s.startswith("00")
    if intl:
        s = s.replace("(0)", "")
    digits = "".join(c for c in s if c.isdigit())
    if intl:
        digits = digits[2:] if s.startswith("00") else digits
        best = None
        for country, (cc, _, lengths) in PHONE_TRUTH.items():
            if digits.startswith(cc) and (best is None or len(cc) > len(PHONE_TRUTH[best][0])):
                best = country
        if best is None:
            return None
        cc, _, lengths = PHONE_TRUTH[best]
        national = digits[len(cc):]
    else:
        cc, trunk, lengths = PHONE_TRUTH[country_hint]
        national = digits[len(trunk):] if digits.startswith(trunk) else digits
    if len(national) not in lengths:
        return None
    return "+" + cc + national


def phone_gold(r):
    rows = []
    for country in PHONE_TRUTH:
        cases = []
        for _ in range(8):
            cases.append(("valid_international", display_phone(country, phone_digits(country, r), "intl")))
        for _ in range(5):
            cases.append(("valid_international", display_phone(country, phone_digits(country, r), "double0")))
        for _ in range(7):
            cases.append(("valid_national", display_phone(country, phone_digits(country, r), "national")))
        for _ in range(4):
            cases.append(("trunk_prefix", display_phone(country, phone_digits(country, r), "trunk0")))
        for k in range(6):
            nat = phone_digits(country, r)
            lengths = PHONE_TRUTH[country][2]
            if k % 2 == 0:
                bad = nat[:min(lengths) - 2]
            else:
                bad = nat + "4" * (max(lengths) + 1 - len(nat))
            style = "national" if k < 3 else "intl"
            if country == "US":
                cc = PHONE_TRUTH[country][0]
                raw = f"+{cc} {bad}" if style == "intl" else bad
            else:
                raw = display_phone_raw(country, bad, style)
            cases.append(("invalid_length", raw))
        assert len(cases) == 30
        for kind, raw in cases:
            expected = validate_phone(country, raw)
            if kind == "invalid_length":
                assert expected is None, raw
            else:
                assert expected is not None, raw
            rows.append((country, raw, expected or "INVALID", kind))
    return rows


def display_phone_raw(country, national, style):
    cc, trunk, _ = PHONE_TRUTH[country]
    body = group(national, [3, 3, 4, 4])
    return f"+{cc} {body}" if style == "intl" else f"{trunk}{body}"


# ------------------------------------------------------------------ persons

class Names:
    def __init__(self, r):
        self.r = r
        self.used = set()

    def fresh(self):
        while True:
            n = f"{self.r.choice(FIRST)} {self.r.choice(LAST)}"
            if n not in self.used:
                self.used.add(n)
                return n


# ----------------------------------------------------------------- registry

def load_phase_gold():
    rows = []
    for line in (ROOT / "gold" / "phase_gold.tsv").read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        raw, phase = line.split("\t")
        rows.append((raw, phase))
    return rows


def drug_code(c, k):
    letters = "".join(ch for ch in c["slug"].upper() if ch.isalpha())[:3]
    return f"{letters}-{101 + k}"


def sponsor_variant(c, r):
    roll = r.random()
    if roll < 0.6:
        return c["name"]
    if roll < 0.8:
        return c["term"]
    if roll < 0.9:
        return c["name"].upper()
    return c["term"] + ", " + SUFFIX[c["country"]] + "."


def build_registry(companies, phases, r):
    counts = {}
    bio = [c for c in companies if c["bio"]]
    for i, c in enumerate(bio):
        if i in (3, 17, 28, 40):
            counts[c["id"]] = 10
        elif i in (9, 33):
            counts[c["id"]] = 20
        elif i in (21, 45, 47):
            counts[c["id"]] = 0
        else:
            counts[c["id"]] = r.randrange(5, 18)
    records = []
    start = date(2019, 1, 1)
    n = 0
    for c in companies:
        for k in range(counts.get(c["id"], 0)):
            n += 1
            raw_phase, gold_phase = phases[(n - 1) % len(phases)]
            cond = r.choice(CONDITIONS)
            drug = drug_code(c, k)
            rec = {
                "nct_id": f"NCT{4100000 + n * 7:08d}",
                "brief_title": f"A Study of {drug} in {cond}",
                "phase": raw_phase,
                "overall_status": r.choice(STATUSES),
                "lead_sponsor": sponsor_variant(c, r),
                "collaborators": [r.choice(UNIVERSITIES)] if r.random() < 0.3 else [],
                "conditions": [cond],
                "interventions": [drug],
                "last_update": (start + timedelta(days=r.randrange(0, 2000))).isoformat(),
            }
            records.append((rec, c, gold_phase))
    return records, counts


def registry_v2(records, r):
    """Later registry state: status updates with newer dates, stale copies
    with older dates, and a few brand-new studies."""
    overlay = []
    picks = r.sample(range(len(records)), 20)
    for i in picks[:14]:
        rec = dict(records[i][0])
        d = date.fromisoformat(rec["last_update"]) + timedelta(days=30 + r.randrange(200))
        rec["overall_status"] = "Completed"
        rec["last_update"] = d.isoformat()
        overlay.append(rec)
    for i in picks[14:]:
        rec = dict(records[i][0])
        d = date.fromisoformat(rec["last_update"]) - timedelta(days=90)
        rec["overall_status"] = "Recruiting"
        rec["last_update"] = d.isoformat()
        overlay.append(rec)
    return overlay


# -------------------------------------------------------------------- sites

def page(title, body):
    return (f"<!DOCTYPE html>\n<html><head><title>{title}</title>"
            f"<style>body {{ font-family: sans-serif; }}</style></head>\n<body>\n{body}\n</body></html>\n")


def team_markup(members, layout):
    if layout == "inline":
        items = "\n".join(f"<li><strong>{n}</strong> — {t}</li>" for n, t in members)
        return f"<ul class=\"team\">\n{items}\n</ul>"
    if layout == "stacked":
        items = "\n".join(f"<div class=\"member\"><h3>{n}</h3><p>{t}</p></div>" for n, t in members)
        return items
    rows = "\n".join(f"<tr><td>{n}</td><td>{t}</td></tr>" for n, t in members)
    return f"<table>\n{rows}\n</table>"


def display_name(name, r):
    return ("Dr. " + name) if r.random() < 0.3 else name


def build_sites(companies, kb_people, r, names):
    """Returns (sites, sites_v2, slot_gold_pages, site_meta)."""
    sites, sites_v2 = {}, {}
    gold = []
    meta = {}
    for idx, c in enumerate(companies):
        host = c["host"]
        if host is None:
            continue
        files = {}
        team_path = r.choice(["team", "leadership", "about/management", "people"]) if c["bio"] else None
        contact_path = "contact"
        links = [("/", "Home"), ("/about", "About us")]
        if team_path:
            links.append((f"/{team_path}", r.choice(["Our Team", "Leadership", "Management", "People"])))
        links.append((f"/{contact_path}", "Contact"))
        if c["country"] in ("DE", "AT"):
            links.append(("/impressum", "Impressum"))
        links.append(("/news", "News"))
        robots_kind = "none"
        if idx % 3 == 0:
            robots_kind = "private"
            links.append(("/private/investors", "Investor portal"))
        links.append((f"https://www.linkedin.test/company/{c['slug']}", "LinkedIn"))
        nav = "".join(f"<a href=\"{u}\">{a}</a> " for u, a in links)
        city, postal = CITY[c["country"]][idx % len(CITY[c["country"]])]
        files["index.html"] = page(c["name"], f"<nav>{nav}</nav>\n<h1>{c['name']}</h1>\n"
                                   f"<p>{c['name']} is a {c['tags'][0]} company based in {city}.</p>")
        files["about.html"] = page("About", f"<h1>About {c['term']}</h1>\n<p>Founded in "
                                   f"{2000 + idx % 20}, we work on {', '.join(r.sample(CONDITIONS, 2))}.</p>")
        files["news.html"] = page("News", f"<h1>News</h1>\n<p>{c['term']} presents new data at a "
                                  f"medical congress in {city}.</p>")
        if robots_kind == "private":
            files["robots.txt"] = "User-agent: *\nDisallow: /private/\n"
            files["private/investors.html"] = page("Investors", "<p>Restricted.</p>")

        # Contact page and phones.
        national = phone_digits(c["country"], r)
        hotline = phone_digits(c["country"], r) if r.random() < 0.2 else None
        style = r.choice(["intl", "intl", "national", "trunk0", "double0"])
        label = {"CH": "Telefon", "DE": "Telefon", "AT": "Tel.", "FR": "Tél.", "GB": "Phone", "US": "Phone"}[c["country"]]
        lines = [f"<h1>Contact</h1>", f"<p>{c['name']}</p>", f"<p>{postal} {city}</p>",
                 f"<p>{label}: {display_phone(c['country'], national, style)}</p>",
                 f"<p>Fax: {display_phone(c['country'], national[:-2] + '99', 'intl')}</p>"]
        phones = [e164(c["country"], national)]
        if hotline:
            lines.append(f"<p>Clinical trials hotline: {display_phone(c['country'], hotline, 'intl')}</p>")
            phones.append(e164(c["country"], hotline))
        lines.append(f"<p>Email: info@{c['slug']}.test</p>")
        files["contact.html"] = page("Contact", "\n".join(lines))
        if c["country"] in ("DE", "AT"):
            files["impressum.html"] = page("Impressum", "\n".join(
                ["<h1>Impressum</h1>", f"<p>{c['name']}</p>",
                 f"<p>Telefon: {display_phone(c['country'], national, 'intl')}</p>"]))
        for p in sorted(set(phones)):
            gold.append((f"http://{host}/{contact_path}", c["id"], "isPhoneNumberOf", p))
            if c["country"] in ("DE", "AT") and p == phones[0]:
                gold.append((f"http://{host}/impressum", c["id"], "isPhoneNumberOf", p))
        c["site_phones"] = sorted(set(phones))

        # Team page.
        if team_path:
            people = kb_people.get(c["id"], {})
            ceo = people.get("CEO")
            if ceo is None or idx % 9 == 4:
                ceo = (None, names.fresh())
            members = [(ceo, "Chief Executive Officer" if r.random() < 0.6 else "CEO")]
            for title in r.sample(KEY_TITLES, r.randrange(2, 4)):
                known = people.get(title_key(title))
                members.append((known or (None, names.fresh()), title))
            for title in r.sample(STAFF_TITLES, r.randrange(0, 3)):
                members.append(((None, names.fresh()), title))
            layout = ["inline", "stacked", "table"][idx % 3]
            shown = [(display_name(m[1], r), t) for m, t in members]
            body = f"<h1>{r.choice(['Our Team', 'Leadership', 'Management Team'])}</h1>\n" + team_markup(shown, layout)
            files[f"{team_path}.html"] = page("Team", body)
            url = f"http://{host}/{team_path}"
            for (pid, name), title in members:
                if title in STAFF_TITLES:
                    continue
                ref = pid or f"provisional:{name}"
                if title in ("CEO", "Chief Executive Officer"):
                    gold.append((url, ref, "chiefExecutiveOfficerOf", c["id"]))
                else:
                    gold.append((url, c["id"], "hasKeyPerson", ref))
            c["site_ceo"] = ceo
            meta[c["id"]] = dict(team_path=team_path, members=members, layout=layout)
        sites[host] = files

        # Later state of the site for a handful of companies.
        v2 = {}
        if team_path and idx % 7 == 2:
            members = list(meta[c["id"]]["members"])
            members[0] = ((None, names.fresh()), "Chief Executive Officer")
            shown = [(m[1], t) for m, t in members]
            v2[f"{team_path}.html"] = page("Team", "<h1>Our Team</h1>\n" + team_markup(shown, meta[c["id"]]["layout"]))
        if idx % 11 == 5:
            new_nat = phone_digits(c["country"], r)
            v2["contact.html"] = files["contact.html"].replace(
                display_phone(c["country"], national, style), display_phone(c["country"], new_nat, "intl"))
        if v2:
            sites_v2[host] = v2
    return sites, sites_v2, gold, meta


def title_key(title):
    return {"Chief Financial Officer": "CFO", "CFO": "CFO"}.get(title, title)


def big_site():
    """A 30-page star-shaped site with robots rules, used for crawl
    compliance: every page links back only to the home page."""
    pages = ["team", "management", "leadership", "board", "people", "about", "contact",
             "impressum", "careers", "about/history"]
    pages += [f"news/2024-{m:02d}" for m in range(1, 13)]
    pages += [f"products/np-{k}" for k in range(1, 6)]
    pages += ["private/board-minutes", "drafts/team-2025"]
    anchors = {"team": "Our Team", "management": "Management", "leadership": "Leadership",
               "board": "Board of Directors", "people": "People", "about": "About us",
               "contact": "Contact", "impressum": "Impressum", "careers": "Careers",
               "about/history": "History", "private/board-minutes": "Board minutes",
               "drafts/team-2025": "Team draft"}
    assert len(pages) == 29
    links = "\n".join(f"<li><a href=\"/{p}\">{anchors.get(p, p.split('/')[-1].replace('-', ' ').title())}</a></li>"
                      for p in pages)
    files = {"index.html": page("Orbis Clinical", f"<h1>Orbis Clinical</h1>\n<ul>\n{links}\n</ul>"),
             "robots.txt": "User-agent: *\nDisallow: /private/\nDisallow: /drafts/\n"}
    for p in pages:
        files[f"{p}.html"] = page(p, f"<p><a href=\"/\">Home</a></p>\n<h1>{p}</h1>\n<p>Placeholder page.</p>")
    return "www.orbis-clinical.test", files


# ------------------------------------------------------------------ linking

def linking_corpus(companies, r):
    by_tag = {}
    for c in companies:
        by_tag.setdefault(c["tags"][0], []).append(c)
    unique_biotech = [c for c in companies if c["twin"] is None and c["tags"] == ["biotech"]]
    unique_all = [c for c in companies if c["twin"] is None]
    docs, gold = [], []

    def surface(c):
        options = [c["name"], c["term"], c["name"].upper()]
        if c["aliases"] and c["twin"] is None:
            options.append(c["aliases"][0])
        return r.choice(options)

    templates = [
        "{0} and {1} announced a research collaboration in {cond}.",
        "{0} reported topline results for {drug}; {1} will co-market the product in Europe.",
        "Shares of {0} rose after {1} agreed to acquire a minority stake.",
        "Investigators at University Hospital Basel compared approaches from {0}, {1} and {2}.",
        "{0} licensed a {cond} programme to {1}, while {2} keeps the Asian rights.",
        "In a filing, {0} named {1} as its manufacturing partner for {drug}.",
    ]

    def emit(parts_fn):
        doc_id = f"doc-{len(docs) + 1:03d}"
        text, spans = parts_fn()
        docs.append({"doc_id": doc_id, "text": text})
        for s, e, eid in spans:
            gold.append((doc_id, s, e, eid))

    def fill(template, mentions):
        text = template
        spans = []
        cond = r.choice(CONDITIONS)
        drug = f"XR-{r.randrange(100, 999)}"
        text = text.replace("{cond}", cond).replace("{drug}", drug)
        for i, (surf, eid) in enumerate(mentions):
            key = "{" + str(i) + "}"
            pos = text.index(key)
            text = text[:pos] + surf + text[pos + len(key):]
            spans = [(s + (len(surf) - len(key)) if s > pos else s,
                      e + (len(surf) - len(key)) if s > pos else e, x) for s, e, x in spans]
            spans.append((pos, pos + len(surf), eid))
        return text, sorted(spans)

    # Plain documents over unique companies, every company at least twice.
    pool = unique_all * 3
    r.shuffle(pool)
    while pool:
        t = r.choice(templates)
        k = t.count("{") - t.count("{cond}") - t.count("{drug}")
        chosen = []
        while pool and len(chosen) < k:
            c = pool.pop()
            if c not in chosen:
                chosen.append(c)
        if len(chosen) < k:
            break
        emit(lambda: fill(t, [(surface(c), c["id"]) for c in chosen]))

    # Canonical twin names are unambiguous.
    for c in companies:
        if c["twin"]:
            ctx = r.choice(unique_all)
            emit(lambda: fill(templates[0], [(c["name"], c["id"]), (ctx["name"], ctx["id"])]))

    # Bare ambiguous aliases, disambiguated by a same-domain company.
    for word in AMBIGUOUS:
        twins = [c for c in companies if c["twin"] == word]
        bio = next(c for c in twins if c["bio"])
        other = next(c for c in twins if not c["bio"])
        ctx = r.choice(unique_biotech)
        emit(lambda: fill("{0} expanded its {cond} pipeline together with {1}.",
                          [(word, bio["id"]), (ctx["name"], ctx["id"])]))
        partner = next(c for c in by_tag[other["tags"][0]]
                       if c is not other and c["twin"] != word)
        emit(lambda: fill("{0} signed a long-term contract with {1}.",
                          [(word, other["id"]), (partner["name"], partner["id"])]))

    # NIL traps: an ambiguous word with no disambiguating context.
    for word in AMBIGUOUS[:6]:
        emit(lambda: (f"{word} Ventures, a private fund, declined to comment on the rumours.", []))
    return docs, gold


# --------------------------------------------------------------------- main

def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def write_tree(root, files):
    for rel, content in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content, encoding="utf-8")


def main():
    for sub in ["kb", "registry", "sites", "sites_v2"]:
        shutil.rmtree(ROOT / sub, ignore_errors=True)
    for name in ["linking_docs.jsonl", "linking.tsv", "slots.tsv", "phone_gold.tsv"]:
        (ROOT / "gold" / name).unlink(missing_ok=True)

    companies = build_companies()
    names = Names(rng)

    # Seed persons: most biotech companies have a known CEO; some a CFO.
    persons, kb_people = [], {}
    for idx, c in enumerate(companies):
        if not c["bio"]:
            continue
        roles = []
        if idx % 5 != 1:
            roles.append("CEO")
        if idx % 3 == 0:
            roles.append("CFO")
        for role in roles:
            pid = fmt_id("pe", len(persons) + 1)
            name = names.fresh()
            persons.append({"id": pid, "full_name": name,
                            "affiliations": [{"company_id": c["id"], "role": role,
                                              "evidence": f"http://{c['host']}/"}]})
            kb_people.setdefault(c["id"], {})[role] = (pid, name)

    phases = load_phase_gold()
    records, counts = build_registry(companies, phases, rng)
    overlay = registry_v2(records, rng)
    sites, sites_v2, page_gold, _ = build_sites(companies, kb_people, rng, names)
    big_host, big_files = big_site()
    sites[big_host] = big_files

    kb_companies = []
    for idx, c in enumerate(companies):
        personnel = [{"person_id": pid, "role": role}
                     for role, (pid, _) in sorted(kb_people.get(c["id"], {}).items())]
        site_phones = c.get("site_phones", [])
        if idx % 6 == 0 or not site_phones:
            phones = []
        elif idx % 10 == 3:
            phones = [e164(c["country"], phone_digits(c["country"], rng))]
        else:
            phones = list(site_phones)
        kb_companies.append({
            "id": c["id"], "canonical_name": c["name"], "aliases": sorted(c["aliases"]),
            "country": c["country"], "website": f"http://{c['host']}/" if c["host"] else None,
            "personnel": personnel, "phones": phones, "last_harvested": None,
            "domain_tags": c["tags"],
        })
    # The crawl-compliance site belongs to a company of its own.
    kb_companies.append({
        "id": fmt_id("co", len(kb_companies) + 1), "canonical_name": "Orbis Clinical Services AG",
        "aliases": [], "country": "CH", "website": f"http://{big_host}/", "personnel": [],
        "phones": [], "last_harvested": None, "domain_tags": ["cro"],
    })

    write_jsonl(ROOT / "kb" / "companies.jsonl", kb_companies)
    write_jsonl(ROOT / "kb" / "persons.jsonl", persons)
    (ROOT / "registry").mkdir(parents=True, exist_ok=True)
    (ROOT / "registry" / "records.json").write_text(
        json.dumps([r for r, _, _ in records], ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    (ROOT / "registry" / "records_v2.json").write_text(
        json.dumps(overlay, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    for host, files in sites.items():
        write_tree(ROOT / "sites" / host, files)
    for host, files in sites_v2.items():
        write_tree(ROOT / "sites_v2" / host, files)

    # Gold: slots over trial records and site pages.
    with (ROOT / "gold" / "slots.tsv").open("w", encoding="utf-8") as f:
        f.write("# document\tsubject\trole\tobject\n")
        for rec, c, gold_phase in records:
            tid = f"tr-fixture-{rec['nct_id']}"
            f.write(f"trial:{rec['nct_id']}\t{tid}\tperformedBy\t{c['id']}\n")
            f.write(f"trial:{rec['nct_id']}\t{tid}\tclinicalPhaseOf\t{gold_phase}\n")
        for url, s, role, o in page_gold:
            f.write(f"{url}\t{s}\t{role}\t{o}\n")

    docs, link_gold = linking_corpus(companies, rng)
    write_jsonl(ROOT / "gold" / "linking_docs.jsonl", docs)
    with (ROOT / "gold" / "linking.tsv").open("w", encoding="utf-8") as f:
        f.write("# doc_id\tstart\tend\tentity_id\n")
        for row in link_gold:
            f.write("\t".join(map(str, row)) + "\n")

    with (ROOT / "gold" / "phone_gold.tsv").open("w", encoding="utf-8") as f:
        f.write("# country\traw\texpected\tcase\n")
        for row in phone_gold(random.Random(SEED + 1)):
            f.write("\t".join(row) + "\n")

    terms = len(companies) + 1
    manifest = {
        "companies": len(kb_companies), "persons": len(persons), "records": len(records),
        "query_terms": terms, "empty_terms": sum(1 for c in companies if counts.get(c["id"], 0) == 0) + 1,
        "boundary_terms": sum(1 for v in counts.values() if v and v % 10 == 0),
        "phase_strings": len({r["phase"] for r, _, _ in records}),
        "sites": len(sites), "linking_mentions": len(link_gold), "linking_docs": len(docs),
        "slot_triples": 2 * len(records) + len(page_gold), "page_triples": len(page_gold),
    }
    (ROOT / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    print(json.dumps(manifest))


if __name__ == "__main__":
    main()
