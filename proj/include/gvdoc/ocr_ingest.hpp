#pragma once

#include <string>

#include "gvdoc/document.hpp"

namespace gvdoc {

// Parses Tesseract TSV output (12 tab-separated columns: level, page_num,
// block_num, par_num, line_num, word_num, left, top, width, height, conf,
// text). Word rows are level=5 with conf != -1 and non-blank text; everything
// else is structure. Paragraphs are (block_num, par_num) groups in first-
// appearance order, boxed by their level=3 row when present, else by the
// union of member tokens. Reading order is row order, truncated at max_tokens.
// Throws DataError for malformed input (bad header, non-numeric geometry with
// the offending line number, zero tokens).
Document parse_tesseract_tsv(const std::string& tsv_text, const std::string& doc_id = "",
                             int max_tokens = 512);

// Canonical document JSON:
//   {"id": str, "page_width": num, "page_height": num, "label": int|null,
//    "paragraphs": [{"bbox": [x1,y1,x2,y2],
//                    "tokens": [{"text": str, "bbox": [x1,y1,x2,y2]}, ...]}]}
// Token reading order is serialization order. parse/serialize round-trip is
// lossless; schema violations raise DataError naming the JSON pointer path.
Document parse_document_json(const std::string& json_text);
std::string serialize_document_json(const Document& doc);

}  // namespace gvdoc
