#include "gvdoc/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/hashing.hpp"
#include "gvdoc/io.hpp"
#include "gvdoc/ocr_ingest.hpp"
#include "gvdoc/rng.hpp"

namespace gvdoc {

namespace {

constexpr double kPageSize = 1000.0;
constexpr double kBottomMargin = 30.0;

const std::vector<std::string> kShared = {
    "the",     "of",      "and",     "to",      "in",     "for",     "with",    "on",
    "at",      "by",      "from",    "this",    "that",   "please",  "your",    "our",
    "thank",   "you",     "date",    "total",   "amount", "number",  "name",    "address",
    "city",    "state",   "phone",   "email",   "subject", "attached", "review", "request",
    "office",  "team",    "project", "meeting", "schedule", "note",   "per",     "item",
    "due",     "terms",   "contact", "street",  "avenue",  "records", "copy",    "page"};

struct TemplatePool {
    std::string name;
    std::vector<std::string> words;
};

const std::vector<TemplatePool>& pools() {
    static const std::vector<TemplatePool> kPools = {
        {"letter",
         {"dear", "sincerely", "regards", "enclosed", "letter", "correspondence", "recipient",
          "sender", "cordially", "greetings", "pleasure", "writing", "inform", "response",
          "inquiry", "appreciate", "concerning", "forward"}},
        {"form",
         {"field", "applicant", "signature", "initial", "section", "complete", "required",
          "optional", "submit", "approval", "authorize", "certify", "form", "entry", "checkbox",
          "middle", "last", "first", "zip"}},
        {"invoice",
         {"invoice", "qty", "price", "subtotal", "tax", "balance", "payment", "remit", "vendor",
          "billing", "shipping", "net", "discount", "charge", "fee", "description", "unit",
          "quantity"}},
        {"memo",
         {"memo", "memorandum", "interoffice", "announcement", "policy", "effective", "staff",
          "department", "management", "notice", "reminder", "distribution", "immediate",
          "attention", "internal", "everyone", "update"}},
        {"resume",
         {"experience", "education", "skills", "objective", "employment", "university", "degree",
          "proficient", "managed", "developed", "achievements", "references", "certified",
          "professional", "summary", "coordinated", "analysis"}},
        {"news",
         {"reported", "according", "officials", "yesterday", "government", "market", "shares",
          "percent", "economy", "spokesman", "announced", "sources", "editor", "reporters",
          "industry", "quarter", "growth", "decline"}}};
    return kPools;
}

const TemplatePool& pool_for(const std::string& tmpl) {
    for (const auto& p : pools()) {
        if (p.name == tmpl) return p;
    }
    throw DataError("unknown document template: " + tmpl);
}

// Flows word boxes left to right inside a column, wrapping at its right edge.
struct Flow {
    Document& doc;
    Rng& rng;
    const TemplatePool& pool;

    std::string word() {
        if (rng.uniform() < 0.5) return pool.words[rng.bounded(pool.words.size())];
        return kShared[rng.bounded(kShared.size())];
    }

    std::string digits(int n) {
        std::string s;
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng.bounded(10)));
        return s;
    }

    // One paragraph of the given words. Returns the y below it (plus gap);
    // emits nothing when the page is full.
    double paragraph(double x, double y, double right, double font,
                     const std::vector<std::string>& words) {
        double char_w = 0.58 * font;
        double line_h = 1.45 * font;
        double cx = x, cy = y;
        int first = static_cast<int>(doc.tokens.size());
        for (const auto& w : words) {
            double width = std::max(1.0, char_w * static_cast<double>(w.size()));
            if (cx + width > right) {
                cx = x;
                cy += line_h;
            }
            if (cy + font > kPageSize - kBottomMargin) break;
            double jx = rng.uniform(-1.0, 1.0), jy = rng.uniform(-1.0, 1.0);
            Token t;
            t.text = w;
            t.bbox = BBox{cx + jx, cy + jy, cx + jx + width, cy + jy + font};
            t.read_index = static_cast<int>(doc.tokens.size());
            t.para_index = static_cast<int>(doc.paragraphs.size());
            doc.tokens.push_back(std::move(t));
            cx += width + char_w;
        }
        int last = static_cast<int>(doc.tokens.size()) - 1;
        if (last < first) return y;  // page full before the first word fit
        Paragraph p;
        p.first_token = first;
        p.last_token = last;
        p.bbox = doc.tokens[static_cast<size_t>(first)].bbox;
        for (int i = first; i <= last; ++i) {
            p.bbox = p.bbox.united(doc.tokens[static_cast<size_t>(i)].bbox);
        }
        doc.paragraphs.push_back(p);
        return cy + font + 0.8 * font;
    }

    std::vector<std::string> sample_words(int lo, int hi) {
        int n = rng.range_int(lo, hi);
        std::vector<std::string> out;
        out.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) out.push_back(word());
        return out;
    }

    double jitter(double v, double amount = 8.0) { return v + rng.uniform(-amount, amount); }
};

void letter_layout(Flow& f) {
    double y = f.jitter(60);
    y = f.paragraph(f.jitter(70), y, 420, 11, f.sample_words(4, 6));          // sender block
    f.paragraph(f.jitter(700), f.jitter(62), 960, 11, {"date", f.digits(2), f.digits(4)});
    y = f.paragraph(f.jitter(70), y + 30, 420, 11, f.sample_words(4, 6));     // recipient
    y = f.paragraph(f.jitter(70), y + 25, 300, 12, {"dear", f.word()});
    y = f.paragraph(f.jitter(70), y + 8, 930, 12, f.sample_words(10, 16));    // body
    y = f.paragraph(f.jitter(70), y + 8, 930, 12, f.sample_words(10, 16));
    f.paragraph(f.jitter(70), y + 20, 400, 12, {"sincerely", f.word(), f.word()});
}

void form_layout(Flow& f) {
    double y = f.paragraph(f.jitter(380), f.jitter(50), 700, 16, f.sample_words(2, 3));
    y += 20;
    int rows = f.rng.range_int(6, 9);
    for (int r = 0; r < rows; ++r) {
        double row_y = y;
        f.paragraph(f.jitter(80, 4), row_y, 440, 11, f.sample_words(1, 2));   // label column
        double value_y =
            f.paragraph(f.jitter(520, 4), row_y, 950, 11,
                        f.rng.uniform() < 0.3 ? std::vector<std::string>{f.digits(5)}
                                              : f.sample_words(1, 3));        // value column
        y = std::max(y + 34.0, value_y);
    }
    f.paragraph(f.jitter(80), y + 24, 900, 10, f.sample_words(4, 6));         // certification line
}

void invoice_layout(Flow& f) {
    f.paragraph(f.jitter(720), f.jitter(50), 950, 18, {"invoice", f.digits(5)});
    double y = f.paragraph(f.jitter(70), f.jitter(70), 380, 11, f.sample_words(4, 6));  // vendor
    y += 30;
    f.paragraph(80, y, 440, 11, {"item"});
    f.paragraph(500, y, 640, 11, {"qty"});
    f.paragraph(760, y, 950, 11, {"price"});
    y += 30;
    int rows = f.rng.range_int(4, 7);
    for (int r = 0; r < rows; ++r) {
        f.paragraph(f.jitter(80, 3), y, 440, 11, f.sample_words(2, 4));
        f.paragraph(f.jitter(510, 3), y, 640, 11, {f.digits(1)});
        f.paragraph(f.jitter(760, 3), y, 950, 11, {f.digits(3)});
        y += 28;
    }
    y = f.paragraph(f.jitter(640), y + 22, 950, 12, {"subtotal", f.digits(4)});
    f.paragraph(f.jitter(640), y, 950, 12, {"total", f.digits(4)});
}

void memo_layout(Flow& f) {
    double y = f.paragraph(f.jitter(80), f.jitter(48), 400, 16, {"memorandum"});
    y += 8;
    for (const char* key : {"to", "from", "date", "subject"}) {
        double row_y = y;
        f.paragraph(f.jitter(80, 3), row_y, 220, 11, {key});
        f.paragraph(f.jitter(240, 3), row_y, 860, 11, f.sample_words(1, 3));
        y += 26;
    }
    y += 18;
    int paras = f.rng.range_int(2, 3);
    for (int p = 0; p < paras; ++p) {
        y = f.paragraph(f.jitter(150), y, 870, 12, f.sample_words(10, 16)) + 6;
    }
}

void resume_layout(Flow& f) {
    double y = f.paragraph(f.jitter(400), f.jitter(44), 720, 20, f.sample_words(2, 2));
    y = f.paragraph(f.jitter(330), y, 780, 10, f.sample_words(3, 5));  // contact line
    y += 16;
    for (const char* section : {"experience", "education"}) {
        y = f.paragraph(f.jitter(60, 4), y, 320, 14, {section}) + 2;
        int entries = f.rng.range_int(2, 2);
        for (int e = 0; e < entries; ++e) {
            y = f.paragraph(f.jitter(120, 6), y, 900, 11, f.sample_words(6, 10)) + 4;
        }
        y += 14;
    }
    f.paragraph(f.jitter(60, 4), y, 320, 14, {"skills"});
}

void news_layout(Flow& f) {
    double y = f.paragraph(f.jitter(60), f.jitter(46), 940, 19, f.sample_words(4, 7));
    y = f.paragraph(f.jitter(60), y, 500, 10, {"by", f.word(), f.word()});
    double top = y + 14;
    for (int col = 0; col < 3; ++col) {
        double x = 45.0 + 325.0 * col;
        double right = x + 285.0;
        double cy = top;
        for (int p = 0; p < 2; ++p) {
            cy = f.paragraph(f.jitter(x, 3), cy, right, 10, f.sample_words(8, 12)) + 4;
        }
    }
}

}  // namespace

const std::vector<std::string>& in_domain_templates() {
    static const std::vector<std::string> kNames = {"letter", "form", "invoice", "memo", "resume"};
    return kNames;
}

const std::string& ood_template() {
    static const std::string kName = "news";
    return kName;
}

Document generate_document(const std::string& tmpl, std::optional<int> label, uint64_t seed,
                           const std::string& id) {
    Document doc;
    doc.id = id;
    doc.page_width = kPageSize;
    doc.page_height = kPageSize;
    doc.label = label;
    Rng rng(seed);
    Flow f{doc, rng, pool_for(tmpl)};
    if (tmpl == "letter") letter_layout(f);
    else if (tmpl == "form") form_layout(f);
    else if (tmpl == "invoice") invoice_layout(f);
    else if (tmpl == "memo") memo_layout(f);
    else if (tmpl == "resume") resume_layout(f);
    else if (tmpl == "news") news_layout(f);
    else throw DataError("unknown document template: " + tmpl);
    doc.validate();
    return doc;
}

void SynthConfig::validate() const {
    require(classes >= 2 && classes <= static_cast<int>(in_domain_templates().size()),
            "synth: classes must be in [2, " +
                std::to_string(in_domain_templates().size()) + "]");
    require(train_per_class > 0 && test_per_class > 0 && ood_count > 0,
            "synth: split sizes must be positive");
}

namespace {

std::string synth_config_json(const SynthConfig& cfg) {
    nlohmann::json j = {{"classes", cfg.classes},
                        {"train_per_class", cfg.train_per_class},
                        {"test_per_class", cfg.test_per_class},
                        {"ood_count", cfg.ood_count},
                        {"seed", cfg.seed}};
    return j.dump();
}

}  // namespace

CorpusManifest generate_corpus(const std::string& dir, const SynthConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    CorpusManifest man;
    man.seed = cfg.seed;
    {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(synth_config_json(cfg))));
        man.config_hash = buf;
    }
    for (int c = 0; c < cfg.classes; ++c) man.classes.push_back(in_domain_templates()[static_cast<size_t>(c)]);

    auto emit = [&](const std::string& split, const std::string& tmpl, std::optional<int> label,
                    int index, uint64_t seed, std::vector<std::string>& list) {
        std::string rel = split + "/" + tmpl + "_" + std::to_string(index) + ".json";
        Document doc = generate_document(tmpl, label, seed, tmpl + "_" + split + "_" + std::to_string(index));
        fs::create_directories(fs::path(dir) / split);
        write_file((fs::path(dir) / rel).string(), serialize_document_json(doc));
        list.push_back(rel);
    };

    for (int c = 0; c < cfg.classes; ++c) {
        const std::string& tmpl = man.classes[static_cast<size_t>(c)];
        for (int i = 0; i < cfg.train_per_class; ++i) {
            emit("train", tmpl, c, i, mix_seed(cfg.seed, 0x100u + static_cast<uint64_t>(c), static_cast<uint64_t>(i)), man.train);
        }
        for (int i = 0; i < cfg.test_per_class; ++i) {
            emit("test", tmpl, c, i, mix_seed(cfg.seed, 0x200u + static_cast<uint64_t>(c), static_cast<uint64_t>(i)), man.test);
        }
    }
    for (int i = 0; i < cfg.ood_count; ++i) {
        emit("ood", ood_template(), std::nullopt, i, mix_seed(cfg.seed, 0x300u, static_cast<uint64_t>(i)), man.ood);
    }

    nlohmann::json j = {{"classes", man.classes},
                        {"splits", {{"train", man.train}, {"test", man.test}, {"ood", man.ood}}},
                        {"seed", man.seed},
                        {"config_hash", man.config_hash}};
    write_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
    return man;
}

CorpusManifest parse_manifest(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        CorpusManifest man;
        man.classes = j.at("classes").get<std::vector<std::string>>();
        man.train = j.at("splits").at("train").get<std::vector<std::string>>();
        man.test = j.at("splits").at("test").get<std::vector<std::string>>();
        man.ood = j.at("splits").at("ood").get<std::vector<std::string>>();
        man.seed = j.at("seed").get<uint64_t>();
        man.config_hash = j.value("config_hash", "");
        return man;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest is missing fields: ") + e.what());
    }
}

CorpusManifest read_manifest(const std::string& dir) {
    return parse_manifest(read_file((std::filesystem::path(dir) / "manifest.json").string()));
}

std::vector<Document> load_documents(const std::string& dir, const std::vector<std::string>& rel_paths) {
    std::vector<Document> docs;
    docs.reserve(rel_paths.size());
    for (const auto& rel : rel_paths) {
        docs.push_back(parse_document_json(read_file((std::filesystem::path(dir) / rel).string())));
    }
    return docs;
}

}  // namespace gvdoc
