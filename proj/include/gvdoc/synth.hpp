#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gvdoc/document.hpp"

namespace gvdoc {

// Names of the generators with class-like layouts (in-domain candidates).
const std::vector<std::string>& in_domain_templates();  // letter, form, invoice, memo, resume
// Three-column layout held out as the out-of-distribution class.
const std::string& ood_template();

// Renders one document on a 1000x1000 page: template-specific blocks of
// word boxes with jittered positions, paragraph boxes = union of their
// tokens. Raw coordinates; run the usual prepare pipeline before modeling.
Document generate_document(const std::string& tmpl, std::optional<int> label, uint64_t seed,
                           const std::string& id);

struct SynthConfig {
    int classes = 4;  // uses the first `classes` in-domain templates
    int train_per_class = 200;
    int test_per_class = 50;
    int ood_count = 100;
    uint64_t seed = 0;

    void validate() const;
};

struct CorpusManifest {
    std::vector<std::string> classes;          // template name per label
    std::vector<std::string> train, test, ood; // document paths relative to the corpus dir
    uint64_t seed = 0;
    std::string config_hash;
};

// Writes train/, test/, ood/ document JSON plus manifest.json under dir.
CorpusManifest generate_corpus(const std::string& dir, const SynthConfig& cfg);

CorpusManifest parse_manifest(const std::string& json_text);
CorpusManifest read_manifest(const std::string& dir);
std::vector<Document> load_documents(const std::string& dir, const std::vector<std::string>& rel_paths);

}  // namespace gvdoc
