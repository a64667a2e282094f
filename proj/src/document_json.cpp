#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/ocr_ingest.hpp"

namespace gvdoc {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw DataError("document json: " + path + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) bad(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) bad(path + "/" + key, "missing");
    return *it;
}

double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    return v.get<double>();
}

BBox bbox_at(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 4) bad(path, "expected [x1,y1,x2,y2]");
    BBox b{number_at(v[0], path + "/0"), number_at(v[1], path + "/1"),
           number_at(v[2], path + "/2"), number_at(v[3], path + "/3")};
    return b;
}

}  // namespace

Document parse_document_json(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded()) throw DataError("document json: not valid JSON");

    Document doc;
    const json& id = field(root, "id", "");
    if (!id.is_string()) bad("/id", "expected a string");
    doc.id = id.get<std::string>();
    doc.page_width = number_at(field(root, "page_width", ""), "/page_width");
    doc.page_height = number_at(field(root, "page_height", ""), "/page_height");

    const json& label = field(root, "label", "");
    if (label.is_null()) {
        doc.label.reset();
    } else if (label.is_number_integer()) {
        doc.label = label.get<int>();
    } else {
        bad("/label", "expected an integer or null");
    }

    const json& paras = field(root, "paragraphs", "");
    if (!paras.is_array()) bad("/paragraphs", "expected an array");
    int read_index = 0;
    for (size_t k = 0; k < paras.size(); ++k) {
        std::string ppath = "/paragraphs/" + std::to_string(k);
        const json& pj = paras[k];
        Paragraph p;
        p.bbox = bbox_at(field(pj, "bbox", ppath), ppath + "/bbox");
        const json& toks = field(pj, "tokens", ppath);
        if (!toks.is_array()) bad(ppath + "/tokens", "expected an array");
        if (toks.empty()) bad(ppath + "/tokens", "paragraph has no tokens");
        p.first_token = read_index;
        for (size_t i = 0; i < toks.size(); ++i) {
            std::string tpath = ppath + "/tokens/" + std::to_string(i);
            const json& tj = toks[i];
            Token t;
            const json& text = field(tj, "text", tpath);
            if (!text.is_string()) bad(tpath + "/text", "expected a string");
            t.text = text.get<std::string>();
            t.bbox = bbox_at(field(tj, "bbox", tpath), tpath + "/bbox");
            t.read_index = read_index++;
            t.para_index = static_cast<int>(k);
            doc.tokens.push_back(std::move(t));
        }
        p.last_token = read_index - 1;
        doc.paragraphs.push_back(p);
    }

    doc.validate();
    return doc;
}

std::string serialize_document_json(const Document& doc) {
    json root;
    root["id"] = doc.id;
    root["page_width"] = doc.page_width;
    root["page_height"] = doc.page_height;
    if (doc.label.has_value())
        root["label"] = *doc.label;
    else
        root["label"] = nullptr;

    json paras = json::array();
    for (const Paragraph& p : doc.paragraphs) {
        json pj;
        pj["bbox"] = {p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2};
        json toks = json::array();
        for (int i = p.first_token; i <= p.last_token; ++i) {
            const Token& t = doc.tokens[static_cast<size_t>(i)];
            toks.push_back({{"text", t.text}, {"bbox", {t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2}}});
        }
        pj["tokens"] = std::move(toks);
        paras.push_back(std::move(pj));
    }
    root["paragraphs"] = std::move(paras);
    return root.dump(2) + "\n";
}

}  // namespace gvdoc
