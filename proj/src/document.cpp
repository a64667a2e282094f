#include "gvdoc/document.hpp"

#include <algorithm>
#include <cctype>

#include "gvdoc/errors.hpp"
#include "gvdoc/hashing.hpp"

namespace gvdoc {

void Document::validate() const {
    require(page_width > 0.0 && page_height > 0.0,
            "document '" + id + "': page dimensions must be positive");
    require(!tokens.empty(), "document '" + id + "': no tokens");
    require(!paragraphs.empty(), "document '" + id + "': no paragraphs");
    if (label.has_value()) require(*label >= 0, "document '" + id + "': negative label");

    const int n = static_cast<int>(tokens.size());
    const int p = static_cast<int>(paragraphs.size());
    for (int i = 0; i < n; ++i) {
        const Token& t = tokens[static_cast<size_t>(i)];
        require(t.read_index == i, "document '" + id + "': read_index gap at position " + std::to_string(i));
        require(t.para_index >= 0 && t.para_index < p,
                "document '" + id + "': token " + std::to_string(i) + " has bad para_index");
        require(t.bbox.valid(), "document '" + id + "': token " + std::to_string(i) + " has inverted bbox");
    }

    // Paragraph token ranges must partition [0, n) in order.
    int expect_first = 0;
    const double eps = 1e-6 * std::max(page_width, page_height);
    for (int k = 0; k < p; ++k) {
        const Paragraph& par = paragraphs[static_cast<size_t>(k)];
        require(par.bbox.valid(), "document '" + id + "': paragraph " + std::to_string(k) + " has inverted bbox");
        require(par.first_token == expect_first && par.last_token >= par.first_token,
                "document '" + id + "': paragraph " + std::to_string(k) + " range is not contiguous");
        expect_first = par.last_token + 1;
        for (int i = par.first_token; i <= par.last_token; ++i) {
            require(i < n, "document '" + id + "': paragraph " + std::to_string(k) + " range exceeds tokens");
            require(tokens[static_cast<size_t>(i)].para_index == k,
                    "document '" + id + "': token " + std::to_string(i) + " disagrees with paragraph range");
            require(par.bbox.contains(tokens[static_cast<size_t>(i)].bbox, eps),
                    "document '" + id + "': paragraph " + std::to_string(k) +
                        " does not contain token " + std::to_string(i));
        }
    }
    require(expect_first == n, "document '" + id + "': paragraph ranges do not cover all tokens");

    if (normalized()) {
        auto in_unit = [](const BBox& b) {
            return b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= 1.0 && b.y2 <= 1.0;
        };
        for (const Token& t : tokens)
            require(in_unit(t.bbox), "document '" + id + "': normalized token bbox outside [0,1]");
        for (const Paragraph& par : paragraphs)
            require(in_unit(par.bbox), "document '" + id + "': normalized paragraph bbox outside [0,1]");
    }
}

std::string Vocab::normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        if (c >= 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

int Vocab::lookup(const std::string& text) const {
    require(size > kReserved, "vocab size must exceed reserved ids");
    std::string norm = normalize_text(text);
    if (norm.empty()) return kUnk;
    if (table.has_value()) {
        auto it = table->find(norm);
        if (it == table->end()) return kUnk;
        require(it->second >= kReserved && it->second < size, "vocab table id out of range for '" + norm + "'");
        return it->second;
    }
    return kReserved + static_cast<int>(fnv1a64(norm) % static_cast<uint64_t>(size - kReserved));
}

void normalize_document(Document& doc) {
    require(doc.page_width > 0.0 && doc.page_height > 0.0,
            "document '" + doc.id + "': page dimensions must be positive");
    const double sx = 1.0 / doc.page_width;
    const double sy = 1.0 / doc.page_height;
    auto scale = [&](BBox& b) {
        b.x1 = std::clamp(b.x1 * sx, 0.0, 1.0);
        b.x2 = std::clamp(b.x2 * sx, 0.0, 1.0);
        b.y1 = std::clamp(b.y1 * sy, 0.0, 1.0);
        b.y2 = std::clamp(b.y2 * sy, 0.0, 1.0);
    };
    for (Token& t : doc.tokens) scale(t.bbox);
    for (Paragraph& p : doc.paragraphs) scale(p.bbox);
    doc.page_width = 1.0;
    doc.page_height = 1.0;
}

void truncate_document(Document& doc, int max_tokens) {
    require(max_tokens > 0, "max_tokens must be positive");
    if (static_cast<int>(doc.tokens.size()) <= max_tokens) return;
    doc.tokens.resize(static_cast<size_t>(max_tokens));
    const int last_kept = max_tokens - 1;
    std::vector<Paragraph> kept;
    for (const Paragraph& p : doc.paragraphs) {
        if (p.first_token > last_kept) break;
        Paragraph q = p;
        q.last_token = std::min(q.last_token, last_kept);
        kept.push_back(q);
    }
    doc.paragraphs = std::move(kept);
}

void tokenize(Document& doc, const Vocab& vocab) {
    for (Token& t : doc.tokens) t.token_id = vocab.lookup(t.text);
}

}  // namespace gvdoc
