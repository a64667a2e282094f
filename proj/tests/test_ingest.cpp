#include <doctest.h>

#include <string>

#include "gvdoc/document.hpp"
#include "gvdoc/errors.hpp"
#include "gvdoc/ocr_ingest.hpp"

using namespace gvdoc;

namespace {

const char* kHeader =
    "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext\n";

std::string tsv_row(int level, int block, int par, int line, int word, int left, int top, int w,
                    int h, const std::string& conf, const std::string& text) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d\t1\t%d\t%d\t%d\t%d\t%d\t%d\t%d\t%d\t%s\t%s\n", level, block,
                  par, line, word, left, top, w, h, conf.c_str(), text.c_str());
    return buf;
}

// Two words in one paragraph, matching the hand-converted boxes.
std::string two_word_tsv() {
    std::string t = kHeader;
    t += tsv_row(1, 0, 0, 0, 0, 0, 0, 100, 50, "-1", "");
    t += tsv_row(3, 1, 1, 0, 0, 5, 5, 70, 30, "-1", "");
    t += tsv_row(5, 1, 1, 1, 1, 10, 10, 30, 20, "96.3", "alpha");
    t += tsv_row(5, 1, 1, 1, 2, 40, 10, 30, 20, "91.0", "beta");
    return t;
}

}  // namespace

TEST_CASE("tsv: left/top/width/height convert to corner boxes") {
    Document doc = parse_tesseract_tsv(two_word_tsv(), "d1");
    CHECK(doc.id == "d1");
    CHECK(doc.page_width == 100.0);
    CHECK(doc.page_height == 50.0);
    REQUIRE(doc.tokens.size() == 2);
    REQUIRE(doc.paragraphs.size() == 1);
    CHECK(doc.tokens[0].text == "alpha");
    CHECK(doc.tokens[0].bbox == BBox{10, 10, 40, 30});
    CHECK(doc.tokens[1].bbox == BBox{40, 10, 70, 30});
    CHECK(doc.tokens[0].read_index == 0);
    CHECK(doc.tokens[1].read_index == 1);
    CHECK(doc.paragraphs[0].bbox == BBox{5, 5, 75, 35});  // the level=3 structural row
    CHECK(doc.paragraphs[0].first_token == 0);
    CHECK(doc.paragraphs[0].last_token == 1);
}

TEST_CASE("tsv: paragraphs are (block, par) groups in block order") {
    std::string t = kHeader;
    t += tsv_row(5, 1, 1, 1, 1, 10, 10, 10, 10, "90", "one");
    t += tsv_row(5, 1, 2, 1, 1, 30, 10, 10, 10, "90", "two");
    t += tsv_row(5, 2, 1, 1, 1, 50, 10, 10, 10, "90", "three");
    Document doc = parse_tesseract_tsv(t, "d2");
    REQUIRE(doc.paragraphs.size() == 3);
    CHECK(doc.tokens[0].para_index == 0);
    CHECK(doc.tokens[1].para_index == 1);
    CHECK(doc.tokens[2].para_index == 2);
    // No level=1 or level=3 rows: page and paragraph boxes fall back to
    // token unions.
    CHECK(doc.page_width == 60.0);
    CHECK(doc.page_height == 20.0);
    CHECK(doc.paragraphs[0].bbox == BBox{10, 10, 20, 20});
    CHECK(doc.paragraphs[2].bbox == BBox{50, 10, 60, 20});
}

TEST_CASE("tsv: structural and low-confidence rows never become tokens") {
    std::string t = kHeader;
    t += tsv_row(5, 1, 1, 1, 1, 10, 10, 10, 10, "-1", "ghost");  // conf -1
    t += tsv_row(5, 1, 1, 1, 2, 30, 10, 10, 10, "80", " ");      // blank text
    t += tsv_row(5, 1, 1, 1, 3, 50, 10, 10, 10, "80", "real");
    Document doc = parse_tesseract_tsv(t, "d3");
    REQUIRE(doc.tokens.size() == 1);
    CHECK(doc.tokens[0].text == "real");
}

TEST_CASE("tsv: malformed input raises data errors") {
    CHECK_THROWS_AS(parse_tesseract_tsv("nope\tnot\ta\theader\n", "x"), DataError);
    CHECK_THROWS_AS(parse_tesseract_tsv(std::string(kHeader), "x"), DataError);  // zero tokens

    std::string bad = kHeader;
    bad += "5\t1\t1\t1\t1\t1\tABC\t10\t10\t10\t90\tword\n";  // non-numeric geometry
    try {
        parse_tesseract_tsv(bad, "x");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("tsv: truncation keeps reading-order prefix and drops empty paragraphs") {
    std::string t = kHeader;
    for (int i = 0; i < 6; ++i) {
        t += tsv_row(5, 1 + i / 3, 1, 1, i + 1, 10 + 10 * i, 10, 8, 8, "90", "w" + std::to_string(i));
    }
    Document doc = parse_tesseract_tsv(t, "d4", 4);
    REQUIRE(doc.tokens.size() == 4);
    REQUIRE(doc.paragraphs.size() == 2);  // second block survives with one token
    CHECK(doc.paragraphs[1].first_token == 3);
    CHECK(doc.paragraphs[1].last_token == 3);
    CHECK(doc.tokens[3].text == "w3");
    doc.validate();
}

TEST_CASE("document json: round-trip is lossless and a fixed point") {
    Document doc = parse_tesseract_tsv(two_word_tsv(), "rt");
    doc.label = 2;
    std::string s1 = serialize_document_json(doc);
    Document back = parse_document_json(s1);
    CHECK(back.id == doc.id);
    CHECK(back.label == doc.label);
    CHECK(back.tokens.size() == doc.tokens.size());
    CHECK(back.tokens[1].bbox == doc.tokens[1].bbox);
    CHECK(back.paragraphs[0].bbox == doc.paragraphs[0].bbox);
    CHECK(serialize_document_json(back) == s1);  // fixed point
}

TEST_CASE("document json: schema violations name the JSON pointer") {
    CHECK_THROWS_AS(parse_document_json("{"), DataError);
    try {
        parse_document_json(R"({"id":"x","page_height":2,"label":null,"paragraphs":[]})");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("/page_width") != std::string::npos);
    }
    // x2 < x1 violates the box invariant.
    CHECK_THROWS_AS(
        parse_document_json(
            R"({"id":"x","page_width":10,"page_height":10,"label":null,
                "paragraphs":[{"bbox":[0,0,5,5],
                               "tokens":[{"text":"a","bbox":[4,0,1,5]}]}]})"),
        InvariantError);
}

TEST_CASE("normalize: rescales, clamps, and is idempotent") {
    Document doc = parse_tesseract_tsv(two_word_tsv(), "n");
    normalize_document(doc);
    CHECK(doc.normalized());
    CHECK(doc.tokens[0].bbox == BBox{0.1, 0.2, 0.4, 0.6});
    Document again = doc;
    normalize_document(again);
    CHECK(again.tokens[0].bbox == doc.tokens[0].bbox);
    CHECK(again.tokens[1].bbox == doc.tokens[1].bbox);

    Document clamp;
    clamp.id = "c";
    clamp.page_width = 1000;
    clamp.page_height = 1000;
    clamp.tokens.push_back({"a", BBox{900, 0, 1050, 10}, 0, 0, -1});
    clamp.paragraphs.push_back({BBox{900, 0, 1050, 10}, 0, 0});
    normalize_document(clamp);
    CHECK(clamp.tokens[0].bbox.x2 == 1.0);
    clamp.validate();
}

TEST_CASE("vocab: hash ids and text normalization") {
    Vocab v;
    // 4 + fnv1a64("total") % 8188, computed independently.
    CHECK(v.lookup("total") == 6433);
    CHECK(v.lookup("Total!") == 6433);  // lowercased, punctuation stripped
    CHECK(v.lookup("total") == v.lookup("total"));
    CHECK(Vocab::normalize_text("Hello,") == "hello");
    CHECK(Vocab::normalize_text("123-45") == "12345");
    CHECK(Vocab::normalize_text("!!!") == "");
    CHECK(Vocab::normalize_text("caf\xc3\xa9") == "caf\xc3\xa9");  // bytes >= 0x80 pass through

    int id = v.lookup("anything");
    CHECK(id >= Vocab::kReserved);
    CHECK(id < v.size);
}

TEST_CASE("vocab: explicit table overrides hashing") {
    Vocab v;
    v.table = std::unordered_map<std::string, int>{{"alpha", 10}, {"beta", 11}};
    CHECK(v.lookup("Alpha") == 10);
    CHECK(v.lookup("gamma") == Vocab::kUnk);
}

TEST_CASE("tokenize assigns ids to every token") {
    Document doc = parse_tesseract_tsv(two_word_tsv(), "t");
    normalize_document(doc);
    Vocab v;
    tokenize(doc, v);
    for (const auto& t : doc.tokens) {
        CHECK(t.token_id >= Vocab::kReserved);
        CHECK(t.token_id < v.size);
    }
    CHECK(doc.tokens[0].token_id == v.lookup("alpha"));
}
