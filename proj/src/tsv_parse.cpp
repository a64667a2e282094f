#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <vector>

#include "gvdoc/errors.hpp"
#include "gvdoc/ocr_ingest.hpp"

namespace gvdoc {
namespace {

const char* kHeader[12] = {"level",    "page_num", "block_num", "par_num",
                           "line_num", "word_num", "left",      "top",
                           "width",    "height",   "conf",      "text"};

struct Row {
    long level = 0, block = 0, par = 0;
    double left = 0, top = 0, width = 0, height = 0, conf = 0;
    std::string text;
};

long parse_long(const std::string& field, const char* name, int line_no) {
    long v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || p != field.data() + field.size())
        throw DataError("tsv line " + std::to_string(line_no) + ": field '" + name +
                        "' is not an integer: '" + field + "'");
    return v;
}

double parse_num(const std::string& field, const char* name, int line_no) {
    try {
        size_t pos = 0;
        double v = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw DataError("tsv line " + std::to_string(line_no) + ": field '" + name +
                        "' is not numeric: '" + field + "'");
    }
}

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Document parse_tesseract_tsv(const std::string& tsv_text, const std::string& doc_id,
                             int max_tokens) {
    std::istringstream in(tsv_text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("tsv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> cols;
    {
        std::istringstream h(line);
        std::string c;
        while (std::getline(h, c, '\t')) cols.push_back(c);
    }
    if (cols.size() != 12)
        throw DataError("tsv: header has " + std::to_string(cols.size()) + " columns, expected 12");
    for (int i = 0; i < 12; ++i)
        if (cols[static_cast<size_t>(i)] != kHeader[i])
            throw DataError(std::string("tsv: header column ") + std::to_string(i + 1) +
                            " is '" + cols[static_cast<size_t>(i)] + "', expected '" + kHeader[i] + "'");

    Document doc;
    doc.id = doc_id;

    // (block, par) -> paragraph slot in first-appearance order.
    std::map<std::pair<long, long>, int> para_slot;
    std::vector<std::optional<BBox>> para_box_row;   // from level=3 rows
    std::vector<std::optional<BBox>> para_box_union; // from member tokens
    std::vector<std::vector<int>> para_tokens;       // read indices
    double page_w = 0.0, page_h = 0.0;
    bool saw_page_row = false;
    double max_right = 0.0, max_bottom = 0.0;

    auto slot_for = [&](long block, long par) {
        auto key = std::make_pair(block, par);
        auto it = para_slot.find(key);
        if (it != para_slot.end()) return it->second;
        int slot = static_cast<int>(para_tokens.size());
        para_slot.emplace(key, slot);
        para_box_row.emplace_back();
        para_box_union.emplace_back();
        para_tokens.emplace_back();
        return slot;
    };

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> f;
        size_t start = 0;
        for (int i = 0; i < 11; ++i) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos)
                throw DataError("tsv line " + std::to_string(line_no) + ": fewer than 12 columns");
            f.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        f.push_back(line.substr(start));  // text, may contain anything but tabs

        Row r;
        r.level = parse_long(f[0], "level", line_no);
        r.block = parse_long(f[2], "block_num", line_no);
        r.par = parse_long(f[3], "par_num", line_no);
        r.left = parse_num(f[6], "left", line_no);
        r.top = parse_num(f[7], "top", line_no);
        r.width = parse_num(f[8], "width", line_no);
        r.height = parse_num(f[9], "height", line_no);
        r.conf = parse_num(f[10], "conf", line_no);
        r.text = f[11];

        BBox box{r.left, r.top, r.left + r.width, r.top + r.height};
        max_right = std::max(max_right, box.x2);
        max_bottom = std::max(max_bottom, box.y2);

        if (r.level == 1 && !saw_page_row) {
            page_w = r.width;
            page_h = r.height;
            saw_page_row = true;
        } else if (r.level == 3) {
            para_box_row[static_cast<size_t>(slot_for(r.block, r.par))] = box;
        } else if (r.level == 5 && r.conf != -1.0 && !blank(r.text)) {
            int slot = slot_for(r.block, r.par);
            int read_index = static_cast<int>(doc.tokens.size());
            Token t;
            t.text = r.text;
            t.bbox = box;
            t.read_index = read_index;
            t.para_index = slot;  // provisional; renumbered below
            doc.tokens.push_back(std::move(t));
            para_tokens[static_cast<size_t>(slot)].push_back(read_index);
            auto& u = para_box_union[static_cast<size_t>(slot)];
            u = u.has_value() ? u->united(box) : box;
        }
    }

    if (doc.tokens.empty()) throw DataError("tsv: no word rows (level=5 with text)");

    // Drop paragraph slots that collected no tokens (level=3 rows with no
    // surviving words) and renumber the rest in first-appearance order.
    std::vector<int> slot_to_para(para_tokens.size(), -1);
    for (size_t slot = 0; slot < para_tokens.size(); ++slot) {
        if (para_tokens[slot].empty()) continue;
        slot_to_para[slot] = static_cast<int>(doc.paragraphs.size());
        Paragraph p;
        p.bbox = para_box_row[slot].has_value() ? *para_box_row[slot] : *para_box_union[slot];
        p.first_token = para_tokens[slot].front();
        p.last_token = para_tokens[slot].back();
        doc.paragraphs.push_back(p);
    }
    for (Token& t : doc.tokens) t.para_index = slot_to_para[static_cast<size_t>(t.para_index)];

    doc.page_width = saw_page_row ? page_w : max_right;
    doc.page_height = saw_page_row ? page_h : max_bottom;

    truncate_document(doc, max_tokens);
    doc.validate();
    return doc;
}

}  // namespace gvdoc
