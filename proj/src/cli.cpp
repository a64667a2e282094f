#include "gvdoc/cli.hpp"

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gvdoc/config.hpp"
#include "gvdoc/errors.hpp"
#include "gvdoc/eval.hpp"
#include "gvdoc/gradcheck.hpp"
#include "gvdoc/graph.hpp"
#include "gvdoc/hashing.hpp"
#include "gvdoc/io.hpp"
#include "gvdoc/ocr_ingest.hpp"
#include "gvdoc/synth.hpp"
#include "gvdoc/trainer.hpp"

namespace gvdoc {

namespace {

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return parse_run_config_toml(read_file(path));
}

std::vector<Document> prepare_all(std::vector<Document> docs, const RunConfig& cfg) {
    Vocab vocab;
    vocab.size = cfg.model.vocab_size;
    for (auto& d : docs) d = prepare_document(std::move(d), vocab, cfg.model.max_tokens);
    return docs;
}

void check_corpus_classes(const CorpusManifest& man, const RunConfig& cfg) {
    if (static_cast<int>(man.classes.size()) != cfg.model.n_classes) {
        throw DataError("corpus has " + std::to_string(man.classes.size()) +
                        " classes but the config expects " + std::to_string(cfg.model.n_classes) +
                        " (set model.classes)");
    }
}

std::string loss_log_text(const RunConfig& cfg, const std::vector<LossRow>& log) {
    return "# config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.train.seed) + "\n" +
           loss_log_csv(log);
}

struct IngestArgs {
    std::string tsv, json, out, id;
    int max_tokens = 512;
};

struct GraphArgs {
    std::string doc, out, config, mode;
    std::optional<int> para_k, max_beta_neighbors;
    uint64_t seed = 0;
    bool train = false;
};

struct SynthArgs {
    std::string out_dir;
    SynthConfig cfg;
};

struct TrainArgs {
    std::string corpus, config, init, out, loss_log;
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
};

struct EvalArgs {
    std::string corpus, init, report, hist, roc;
    double temperature = 1.0;
};

struct GradcheckArgs {
    std::string config;
    std::optional<int> d, fusion_heads, gat_layers, gat_heads;
    std::optional<uint64_t> seed;
    int tokens = 12, elements = 0;
    double tolerance = 1e-4, h = 1e-5;
};

int run_ingest(const IngestArgs& a) {
    if (a.tsv.empty() == a.json.empty()) {
        std::fprintf(stderr, "error: ingest needs exactly one of --tsv or --json\n");
        return 1;
    }
    Document doc;
    if (!a.tsv.empty()) {
        doc = parse_tesseract_tsv(read_file(a.tsv), a.id, a.max_tokens);
    } else {
        doc = parse_document_json(read_file(a.json));
        if (!a.id.empty()) doc.id = a.id;
        truncate_document(doc, a.max_tokens);
        doc.validate();
    }
    write_file(a.out, serialize_document_json(doc));
    std::printf("wrote %s (%zu tokens, %zu paragraphs)\n", a.out.c_str(), doc.tokens.size(),
                doc.paragraphs.size());
    return 0;
}

int run_graph(const GraphArgs& a) {
    RunConfig cfg = load_config(a.config);
    if (!a.mode.empty()) cfg.graph.mode = graph_mode_from_name(a.mode);
    if (a.para_k) {
        cfg.graph.para_k_test = *a.para_k;
        cfg.graph.para_k_train_min = *a.para_k;
        cfg.graph.para_k_train_max = *a.para_k;
    }
    if (a.max_beta_neighbors) cfg.graph.max_beta_neighbors = *a.max_beta_neighbors;
    cfg.validate();
    Document doc = parse_document_json(read_file(a.doc));
    Vocab vocab;
    vocab.size = cfg.model.vocab_size;
    doc = prepare_document(std::move(doc), vocab, cfg.model.max_tokens);
    DocumentGraph g = build_graph(doc, cfg.graph, a.seed, a.train);
    write_file(a.out, serialize_graph_json(g, config_hash(cfg)));
    std::printf("wrote %s (%d nodes, %zu directed edges)\n", a.out.c_str(), g.node_count(),
                g.edges.size());
    return 0;
}

int run_synth(const SynthArgs& a) {
    CorpusManifest man = generate_corpus(a.out_dir, a.cfg);
    std::printf("wrote %s: %zu classes, %zu train, %zu test, %zu ood\n", a.out_dir.c_str(),
                man.classes.size(), man.train.size(), man.test.size(), man.ood.size());
    return 0;
}

int run_pretrain(const TrainArgs& a) {
    RunConfig cfg = load_config(a.config);
    GraphModel model(ModelConfig{});
    AdamWState opt;
    std::vector<LossRow> history;
    if (!a.init.empty()) {
        LoadedCheckpoint ckpt = load_checkpoint(a.init);
        if (!a.config.empty()) {
            ckpt.config.train = cfg.train;
            ckpt.config.graph = cfg.graph;
        }
        cfg = ckpt.config;
        model = std::move(ckpt.model);
        opt = std::move(ckpt.opt);
        history = std::move(ckpt.history);
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    cfg.validate();
    if (a.init.empty()) {
        model = GraphModel::random_init(cfg.model, cfg.train.seed);
        opt = AdamWState::init(model.params());
    }

    CorpusManifest man = read_manifest(a.corpus);
    check_corpus_classes(man, cfg);
    auto docs = prepare_all(load_documents(a.corpus, man.train), cfg);
    PretrainRun run = pretrain(model, opt, docs, cfg);
    history.insert(history.end(), run.log.begin(), run.log.end());
    save_checkpoint(a.out, model, opt, cfg, history);
    if (!a.loss_log.empty()) write_file(a.loss_log, loss_log_text(cfg, history));
    std::printf("wrote %s after %lld steps\n", a.out.c_str(), static_cast<long long>(opt.step));
    return 0;
}

int run_finetune(const TrainArgs& a) {
    RunConfig cfg = load_config(a.config);
    GraphModel model(ModelConfig{});
    if (!a.init.empty()) {
        LoadedCheckpoint ckpt = load_checkpoint(a.init);
        if (!a.config.empty()) {
            ckpt.config.train = cfg.train;
            ckpt.config.graph = cfg.graph;
        }
        cfg = ckpt.config;  // model shape always comes from the checkpoint
        model = std::move(ckpt.model);
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    cfg.validate();
    if (a.init.empty()) model = GraphModel::random_init(cfg.model, cfg.train.seed);
    AdamWState opt = AdamWState::init(model.params());  // fresh optimizer either way

    CorpusManifest man = read_manifest(a.corpus);
    check_corpus_classes(man, cfg);
    auto train_docs = prepare_all(load_documents(a.corpus, man.train), cfg);
    auto test_docs = prepare_all(load_documents(a.corpus, man.test), cfg);
    FinetuneRun run = finetune(model, opt, train_docs, test_docs, cfg);
    save_checkpoint(a.out, model, opt, cfg, run.log);
    if (!a.loss_log.empty()) write_file(a.loss_log, loss_log_text(cfg, run.log));
    std::printf("wrote %s: %d epochs, eval accuracy %.4f\n", a.out.c_str(), run.epochs_run,
                run.eval_accuracy);
    return 0;
}

int run_eval(const EvalArgs& a) {
    LoadedCheckpoint ckpt = load_checkpoint(a.init);
    const RunConfig& cfg = ckpt.config;
    CorpusManifest man = read_manifest(a.corpus);
    check_corpus_classes(man, cfg);
    auto test_docs = prepare_all(load_documents(a.corpus, man.test), cfg);
    auto ood_docs = prepare_all(load_documents(a.corpus, man.ood), cfg);
    auto test_graphs = build_eval_graphs(test_docs, cfg.graph, mix_seed(cfg.train.seed, 0xEA1u, 0));
    auto ood_graphs = build_eval_graphs(ood_docs, cfg.graph, mix_seed(cfg.train.seed, 0xEA2u, 0));
    EvalResult r = evaluate(ckpt.model, test_graphs, ood_graphs, a.temperature);
    write_file(a.report, eval_report_json(r, config_hash(cfg), cfg.train.seed));
    if (!a.hist.empty()) write_file(a.hist, confidence_histogram_csv(r));
    if (!a.roc.empty()) write_file(a.roc, roc_csv(r));
    std::printf("accuracy %.4f, msp auroc %.4f, energy auroc %.4f\n", r.acc.micro,
                r.msp_stats.auroc_micro, r.energy_stats.auroc_micro);
    return 0;
}

int run_gradcheck(const GradcheckArgs& a) {
    ModelConfig mc;
    GraphConfig gc;
    uint64_t seed = 7;
    if (!a.config.empty()) {
        RunConfig cfg = load_config(a.config);
        mc = cfg.model;
        gc = cfg.graph;
        seed = cfg.train.seed;
    } else {
        mc.d = 8;
        mc.fusion_heads = 2;
        mc.gat_layers = 2;
        mc.gat_heads = 2;
        mc.vocab_size = 64;
        mc.n_classes = 4;
        mc.bbox_bins = 16;
        mc.max_pos = 32;
    }
    if (a.d) mc.d = *a.d;
    if (a.fusion_heads) mc.fusion_heads = *a.fusion_heads;
    if (a.gat_layers) mc.gat_layers = *a.gat_layers;
    if (a.gat_heads) mc.gat_heads = *a.gat_heads;
    if (a.seed) seed = *a.seed;
    mc.max_tokens = a.tokens;  // probe document size stays flag-governed
    mc.validate();

    Document doc = generate_document("letter", 0, seed, "gradcheck");
    Vocab vocab;
    vocab.size = mc.vocab_size;
    doc = prepare_document(std::move(doc), vocab, mc.max_tokens);
    DocumentGraph graph = build_graph(doc, gc, seed, false);

    GraphModel model = GraphModel::random_init(mc, seed);
    GradCheckReport report = finite_diff_check(model, graph, a.tolerance, a.h, a.elements);
    std::fputs(gradcheck_report_text(report).c_str(), stdout);
    if (!report.passed) {
        throw InvariantError("analytic gradients disagree with finite differences");
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"document graph classification toolkit"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Convert OCR output to canonical document JSON");
    auto* tsv_opt = ingest->add_option("--tsv", ingest_args.tsv, "Tesseract TSV input");
    auto* json_opt =
        ingest->add_option("--json", ingest_args.json, "document JSON input (re-canonicalize)");
    tsv_opt->excludes(json_opt);
    json_opt->excludes(tsv_opt);
    ingest->add_option("--out", ingest_args.out, "document JSON output")->required();
    ingest->add_option("--id", ingest_args.id, "document id (defaults to empty)");
    ingest->add_option("--max-tokens", ingest_args.max_tokens, "token cap");

    GraphArgs graph_args;
    auto* graph = app.add_subcommand("graph", "Build a document graph from document JSON");
    graph->add_option("--doc", graph_args.doc, "document JSON input")->required();
    graph->add_option("--out", graph_args.out, "graph JSON output")->required();
    graph->add_option("--config", graph_args.config, "TOML run config");
    graph->add_option("--mode", graph_args.mode, "edge mode: beta, paragraph or both");
    graph->add_option("--para-k", graph_args.para_k, "paragraph neighbors per token");
    graph->add_option("--max-beta-neighbors", graph_args.max_beta_neighbors,
                      "skeleton degree cap");
    graph->add_option("--seed", graph_args.seed, "sampling seed");
    graph->add_flag("--train", graph_args.train, "training-mode neighbor sampling");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    synth->add_option("--out,--out-dir", synth_args.out_dir, "corpus directory")->required();
    synth->add_option("--classes", synth_args.cfg.classes, "number of in-domain classes");
    synth->add_option("--train,--train-per-class", synth_args.cfg.train_per_class,
                      "train docs per class");
    synth->add_option("--test,--test-per-class", synth_args.cfg.test_per_class,
                      "test docs per class");
    synth->add_option("--ood", synth_args.cfg.ood_count, "out-of-distribution doc count");
    synth->add_option("--seed", synth_args.cfg.seed, "corpus seed");

    TrainArgs pretrain_args;
    auto* pre = app.add_subcommand("pretrain", "Self-supervised pre-training on a corpus");
    pre->add_option("--corpus", pretrain_args.corpus, "corpus directory")->required();
    pre->add_option("--config", pretrain_args.config, "TOML run config");
    pre->add_option("--init", pretrain_args.init, "checkpoint to resume from");
    pre->add_option("--out", pretrain_args.out, "checkpoint output")->required();
    pre->add_option("--loss-log", pretrain_args.loss_log, "loss curve CSV output");
    pre->add_option("--seed", pretrain_args.seed, "seed override");
    pre->add_option("--epochs", pretrain_args.epochs, "epoch override");

    TrainArgs finetune_args;
    auto* fine = app.add_subcommand("finetune", "Supervised classification training");
    fine->add_option("--corpus", finetune_args.corpus, "corpus directory")->required();
    fine->add_option("--config", finetune_args.config, "TOML run config");
    fine->add_option("--init,--ckpt", finetune_args.init, "checkpoint to start from");
    fine->add_option("--out", finetune_args.out, "checkpoint output")->required();
    fine->add_option("--loss-log", finetune_args.loss_log, "loss curve CSV output");
    fine->add_option("--seed", finetune_args.seed, "seed override");
    fine->add_option("--epochs", finetune_args.epochs, "epoch override");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "Accuracy and OOD separation of a checkpoint");
    ev->add_option("--corpus", eval_args.corpus, "corpus directory")->required();
    ev->add_option("--model,--init", eval_args.init, "checkpoint to evaluate")->required();
    ev->add_option("--report", eval_args.report, "report JSON output")->required();
    ev->add_option("--hist", eval_args.hist, "confidence histogram CSV output");
    ev->add_option("--roc", eval_args.roc, "ROC sweep CSV output");
    ev->add_option("--temperature", eval_args.temperature, "energy temperature");

    GradcheckArgs gradcheck_args;
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients to finite differences");
    gc->add_option("--config", gradcheck_args.config, "TOML run config supplying the model shape");
    gc->add_option("--d", gradcheck_args.d, "embedding width");
    gc->add_option("--fusion-heads", gradcheck_args.fusion_heads, "fusion head count");
    gc->add_option("--gat-layers", gradcheck_args.gat_layers, "attention layer count");
    gc->add_option("--gat-heads", gradcheck_args.gat_heads, "attention head count");
    gc->add_option("--tokens", gradcheck_args.tokens, "document token cap");
    gc->add_option("--elements", gradcheck_args.elements, "probes per tensor (0 = all)");
    gc->add_option("--tolerance", gradcheck_args.tolerance, "max relative error");
    gc->add_option("--step", gradcheck_args.h, "finite difference step");
    gc->add_option("--seed", gradcheck_args.seed, "model and document seed");

    try {
        app.parse(argc, argv);
        if (ingest->parsed()) return run_ingest(ingest_args);
        if (graph->parsed()) return run_graph(graph_args);
        if (synth->parsed()) return run_synth(synth_args);
        if (pre->parsed()) return run_pretrain(pretrain_args);
        if (fine->parsed()) return run_finetune(finetune_args);
        if (ev->parsed()) return run_eval(eval_args);
        if (gc->parsed()) return run_gradcheck(gradcheck_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const InvariantError& e) {
        std::fprintf(stderr, "invariant violated: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected failure: %s\n", e.what());
        return 3;
    }
}

}  // namespace gvdoc
