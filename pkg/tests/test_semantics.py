"""Glossary matching, category lexicons, and translation plumbing."""

import http.server
import json
import threading

import pytest

from dialoglens.semantics import (
    TABLE_CATEGORIES,
    CategoryLexicon,
    Glossary,
    IdentityTranslator,
    Language,
    OfflineLexiconTranslator,
    RemoteTranslator,
    TranslationTransportError,
    TranslationWarning,
    count_categories,
    count_math_terms,
    load_demo_glossary,
    load_demo_lexicons,
    load_demo_translator,
    load_glossary,
    load_lexicon,
    load_translation_lexicon,
    translate_segment,
)


class TestGlossary:
    def test_longest_match_wins(self):
        g = Glossary(["laplace transform", "laplace", "transform"])
        assert g.count("the laplace transform of f") == 1
        assert list(g.iter_matches("the laplace transform of f")) == [
            (4, "laplace transform")
        ]

    def test_latin_terms_match_whole_words_only(self):
        g = Glossary(["matrix"])
        assert g.count("matrix matrixes submatrix") == 1
        assert g.count("Matrix, MATRIX!") == 2

    def test_cjk_terms_match_as_substrings(self):
        g = Glossary(["矩陣", "特徵值", "特徵"])
        assert g.count("這個矩陣的特徵值") == 2
        assert [t for _, t in g.iter_matches("特徵特徵值")] == ["特徵", "特徵值"]

    def test_non_overlapping_scan(self):
        g = Glossary(["aa"])
        assert g.count("aaaa") == 0  # one 4-letter word, no boundaries
        assert g.count("aa aa") == 2

    def test_requires_terms(self):
        with pytest.raises(ValueError, match="no terms"):
            Glossary(["", "   "])

    def test_load_glossary_strips_comments(self, tmp_path):
        path = tmp_path / "glossary.txt"
        path.write_text("# header\nmatrix  # inline note\n\n行列式\n", "utf-8")
        g = load_glossary(path)
        assert len(g) == 2
        assert count_math_terms("the matrix 行列式", g) == 2


DIC = """%
1\tPE
2\tNE
3\tInsight
%
good\t1
happ*\t1
bad\t2
think\t3
lol\t1 2
"""


def write_dic(tmp_path, body=DIC, name="lex.dic"):
    path = tmp_path / name
    path.write_text(body, "utf-8")
    return path


class TestCategoryLexicon:
    def test_exact_and_prefix_matching(self, tmp_path):
        lex = load_lexicon(write_dic(tmp_path), Language.ENGLISH)
        assert lex.match_token("good") == frozenset({"PE"})
        assert lex.match_token("HAPPY") == frozenset({"PE"})
        assert lex.match_token("happiness") == frozenset({"PE"})
        assert lex.match_token("unhappy") == frozenset()
        assert lex.match_token("lol") == frozenset({"PE", "NE"})
        assert lex.categories == frozenset({"PE", "NE", "Insight"})

    def test_header_errors(self, tmp_path):
        with pytest.raises(ValueError, match="header"):
            load_lexicon(write_dic(tmp_path, "good\t1\n"), Language.ENGLISH)
        with pytest.raises(ValueError, match="unknown category id"):
            load_lexicon(write_dic(tmp_path, "%\n1\tPE\n%\ngood\t9\n"), Language.ENGLISH)
        with pytest.raises(ValueError, match="TAB"):
            load_lexicon(write_dic(tmp_path, "%\n1\tPE\n%\ngood 1\n"), Language.ENGLISH)

    def test_pattern_validation(self):
        with pytest.raises(ValueError, match="bare"):
            CategoryLexicon.from_patterns(Language.ENGLISH, {"*": {"PE"}})
        with pytest.raises(ValueError, match="empty"):
            CategoryLexicon.from_patterns(Language.ENGLISH, {"good": set()})

    def test_count_categories_sums_both_languages(self, tmp_path):
        english = load_lexicon(write_dic(tmp_path), Language.ENGLISH)
        chinese = CategoryLexicon.from_patterns(
            Language.CHINESE, {"好": {"PE"}, "非常好": {"PE"}, "難": {"NE"}}
        )
        counts = count_categories("good 好 非常好 bad 難", english, chinese)
        # longest-first: the compound counts once, not as two hits
        assert counts["PE"] == 3
        assert counts["NE"] == 2
        assert counts["Insight"] == 0
        assert counts["Bogus"] == 0
        assert dict(counts.items())["PE"] == 3

    def test_table_category_names(self):
        assert len(TABLE_CATEGORIES) == 19
        assert len(set(TABLE_CATEGORIES)) == 19
        for name in ("PE", "NE", "Assent", "QU"):
            assert name in TABLE_CATEGORIES


class TestOfflineTranslator:
    LEX = {"矩陣": "matrix", "特徵值": "eigenvalue", "特徵": "feature", "這個": "this"}

    def test_translates_known_terms(self):
        t = OfflineLexiconTranslator(self.LEX)
        assert t.translate("這個矩陣") == "this matrix"
        assert t.translate("the 矩陣 is big") == "the matrix is big"

    def test_longest_term_wins(self):
        t = OfflineLexiconTranslator(self.LEX)
        assert t.translate("特徵值") == "eigenvalue"
        assert t.translate("特徵") == "feature"

    def test_unknown_characters_pass_through_with_warning(self):
        t = OfflineLexiconTranslator(self.LEX)
        with pytest.warns(TranslationWarning, match="untranslatable"):
            out = t.translate("他說矩陣")
        assert out == "他 說 matrix"

    def test_latin_text_untouched(self):
        t = OfflineLexiconTranslator(self.LEX)
        assert t.translate("no chinese here") == "no chinese here"

    def test_identity_translator(self):
        assert IdentityTranslator().translate("保持 original") == "保持 original"
        assert translate_segment("x", IdentityTranslator()) == "x"

    def test_load_translation_lexicon(self, tmp_path):
        path = tmp_path / "trans.tsv"
        path.write_text("# comment\n矩陣\tmatrix\n\n行列式\tdeterminant\n", "utf-8")
        t = load_translation_lexicon(path)
        assert t.translate("矩陣 行列式") == "matrix 行列式".replace("行列式", "determinant")


class _OneShotHandler(http.server.BaseHTTPRequestHandler):
    captured = []
    reply: dict = {"text": "hello"}

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        type(self).captured.append((dict(self.headers), json.loads(body)))
        payload = json.dumps(type(self).reply).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def mt_server():
    server = http.server.HTTPServer(("127.0.0.1", 0), _OneShotHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _OneShotHandler.captured = []
    _OneShotHandler.reply = {"text": "hello"}
    yield f"http://127.0.0.1:{server.server_port}/"
    server.shutdown()


class TestRemoteTranslator:
    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("DIALOGLENS_MT_URL", raising=False)
        with pytest.raises(ValueError, match="DIALOGLENS_MT_URL"):
            RemoteTranslator()

    def test_latin_short_circuits_without_network(self):
        t = RemoteTranslator(url="http://127.0.0.1:1/")
        assert t.translate("plain english") == "plain english"

    def test_posts_expected_payload(self, mt_server):
        t = RemoteTranslator(url=mt_server, api_key="sekrit")
        assert t.translate("你好") == "hello"
        headers, body = _OneShotHandler.captured[0]
        assert body == {"q": "你好", "source": "zh", "target": "en"}
        assert headers["Authorization"] == "Bearer sekrit"

    def test_env_configuration(self, mt_server, monkeypatch):
        monkeypatch.setenv("DIALOGLENS_MT_URL", mt_server)
        monkeypatch.setenv("DIALOGLENS_MT_KEY", "from-env")
        t = RemoteTranslator()
        assert t.translate("你好") == "hello"
        headers, _ = _OneShotHandler.captured[-1]
        assert headers["Authorization"] == "Bearer from-env"

    def test_empty_reply_falls_back_with_warning(self, mt_server):
        _OneShotHandler.reply = {"text": ""}
        t = RemoteTranslator(url=mt_server)
        with pytest.warns(TranslationWarning, match="no text"):
            assert t.translate("你好") == "你好"

    def test_transport_failure_raises(self):
        t = RemoteTranslator(url="http://127.0.0.1:1/", timeout=0.5)
        with pytest.raises(TranslationTransportError):
            t.translate("你好")


class TestDemoResources:
    def test_demo_assets_load(self):
        glossary = load_demo_glossary()
        english, chinese = load_demo_lexicons()
        translator = load_demo_translator()
        assert len(glossary) > 0
        assert "PE" in english.categories
        assert chinese.language == Language.CHINESE
        assert "矩陣" not in translator.translate("矩陣")
