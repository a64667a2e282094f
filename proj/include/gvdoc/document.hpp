#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvdoc/geometry.hpp"

namespace gvdoc {

struct Token {
    std::string text;
    BBox bbox;
    int read_index = 0;  // global reading-order position, 0-based
    int para_index = 0;  // owning paragraph
    int token_id = -1;   // -1 until tokenize() assigns vocabulary ids
};

struct Paragraph {
    BBox bbox;
    int first_token = 0;  // read_index of first member token
    int last_token = 0;   // read_index of last member token, inclusive
};

struct Document {
    std::string id;
    double page_width = 0.0;
    double page_height = 0.0;
    std::optional<int> label;
    std::vector<Token> tokens;        // sorted by read_index
    std::vector<Paragraph> paragraphs;

    // Coordinates count as normalized once the page has been rescaled to 1x1.
    bool normalized() const { return page_width == 1.0 && page_height == 1.0; }

    // Throws InvariantError when any structural contract fails: positive page
    // dims, read_index = position, paragraph ranges partition the tokens in
    // order, boxes valid, paragraph boxes contain their tokens (eps relative
    // to page size), coordinates in [0,1] once normalized.
    void validate() const;
};

// Fixed-size hash vocabulary with reserved control ids. An explicit table can
// override hashing (unknown words then map to UNK).
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kMask = 1;
    static constexpr int kSup = 2;
    static constexpr int kUnk = 3;
    static constexpr int kReserved = 4;

    int size = 8192;
    std::optional<std::unordered_map<std::string, int>> table;

    // Lowercases ASCII letters and drops ASCII punctuation; bytes >= 0x80 pass
    // through. Empty result means the token has no lexical content.
    static std::string normalize_text(const std::string& text);

    // Normalized text -> id in [kReserved, size). Never returns a reserved id
    // for non-empty normalized text.
    int lookup(const std::string& text) const;
};

// Rescales all coordinates by the page dimensions, clamps to [0,1], and marks
// the page as 1x1. Idempotent.
void normalize_document(Document& doc);

// Keeps the first max_tokens tokens in reading order; paragraphs are clipped
// or dropped and their boxes left as-is (they still contain the survivors).
void truncate_document(Document& doc, int max_tokens);

// Assigns token_id to every token.
void tokenize(Document& doc, const Vocab& vocab);

}  // namespace gvdoc
