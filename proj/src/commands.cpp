// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/commands.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "uapforge/checkpoint.hpp"
#include "uapforge/eval.hpp"
#include "uapforge/hash.hpp"
#include "uapforge/rng.hpp"
#include "uapforge/tensor_io.hpp"

namespace uapforge {

namespace fs = std::filesystem;
using nlohmann::json;

int run_guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        err << "training diverged in epoch " << e.epoch() << ": " << e.what() << '\n';
        return kExitDivergence;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const MissingFileError& e) {
        err << "missing artifact: " << e.what() << '\n';
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

fs::path resolve_ref(const fs::path& dir, const std::string& name) {
    const fs::path ref = dir / (name + ".ref");
    if (!fs::exists(ref)) throw MissingFileError("missing file " + ref.string() + " (no artifact named '" + name + "')");
    const auto bytes = read_file_bytes(ref);
    std::string target(bytes.begin(), bytes.end());
    while (!target.empty() && (target.back() == '\n' || target.back() == '\r')) target.pop_back();
    const fs::path path = dir / target;
    if (!fs::exists(path)) throw MissingFileError("missing file " + path.string() + " (referenced by " + ref.string() + ")");
    return path;
}

namespace {

std::string short_hash(const std::string& hash) {
    return hash.substr(0, 12);
}

void write_text(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_ref(const fs::path& dir, const std::string& name, const fs::path& target) {
    write_text(dir / (name + ".ref"), target.filename().string() + "\n");
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const ModelConfig& find_model(const RunConfig& config, const std::string& name) {
    for (const auto& m : config.models) {
        if (m.name == name) return m;
    }
    throw ConfigError("no model named '" + name + "'");
}

fs::path checkpoint_path(const RunConfig& config, const ModelConfig& m) {
    if (!m.checkpoint.empty()) return m.checkpoint;
    return resolve_ref(OutputTree{config.output.directory}.checkpoints(), m.name);
}

std::vector<std::string> surrogate_names(const RunConfig& config) {
    if (!config.surrogates.empty()) return config.surrogates;
    return {config.models.front().name};
}

std::string delta_label(const RunConfig& config) {
    return config.delta_name.empty() ? config.attack.variant : config.delta_name;
}

const Dataset& eval_split(const RunConfig& config, const DatasetSplits& splits) {
    if (config.eval.split == "train") return splits.train;
    if (config.eval.split == "craft") return splits.craft;
    if (splits.test.size() == 0) throw ConfigError("eval.split: 'test' requested but no held-out data is configured");
    return splits.test;
}

// ---- train ---------------------------------------------------------------

template <Real T>
TrainResult<T> train_model(const RunConfig& config, const ModelConfig& m, const Dataset& train) {
    const ModelSpec spec = named_architecture(m.arch, train.sample_shape(), train.num_classes, m.width);
    const std::uint64_t model_seed = derive_seed(derive_seed(config.seed, "train"), m.name);
    ModelState<T> model = build_model<T>(spec, derive_seed(model_seed, "init"));
    TrainConfig tc = m.train;
    tc.seed = model_seed;
    return train_erm(std::move(model), train, tc);
}

template <Real T>
int train_impl(const RunConfig& config, std::ostream& out) {
    const DatasetSplits splits = resolve_datasets(config.dataset);
    const OutputTree tree{config.output.directory};
    for (const auto& m : config.models) {
        TrainResult<T> res = train_model<T>(config, m, splits.train);
        const double train_acc = accuracy(res.model, splits.train);
        CheckpointMeta meta;
        meta.seed = config.seed;
        meta.train = m.train;
        meta.train.seed = derive_seed(derive_seed(config.seed, "train"), m.name);
        meta.dataset_fp = splits.train.fingerprint;
        meta.dataset_name = splits.train.name;
        meta.history = res.history;
        meta.extra = json{{"name", m.name}, {"train_accuracy", round4(train_acc)}, {"run_config", to_json(config)}};
        std::string test_note;
        if (splits.test.size() > 0) {
            const double test_acc = accuracy(res.model, splits.test);
            meta.extra["test_accuracy"] = round4(test_acc);
            test_note = " test_acc=" + fmt(test_acc);
        }
        const std::string hash = git_blob_hash(encode_tensor(res.model.params));
        const fs::path path = tree.checkpoints() / (m.name + "-" + short_hash(hash) + ".uapt");
        save_checkpoint(path, res.model, meta);
        write_ref(tree.checkpoints(), m.name, path);
        out << "trained " << m.name << " (" << m.arch << ", " << res.model.params.numel() << " params)"
            << " train_acc=" << fmt(train_acc) << test_note << " -> " << path.string() << '\n';
    }
    return kExitOk;
}

// ---- craft ---------------------------------------------------------------

template <Real T>
struct Surrogates {
    std::vector<std::string> names;
    std::vector<fs::path> paths;
    std::vector<ModelState<T>> models;
    std::vector<json> sidecars;
};

template <Real T>
Surrogates<T> load_models(const std::vector<std::string>& names, const std::vector<fs::path>& paths) {
    Surrogates<T> s;
    s.names = names;
    s.paths = paths;
    for (const auto& p : paths) {
        LoadedCheckpoint<T> ck = load_checkpoint<T>(p);
        s.models.push_back(std::move(ck.model));
        s.sidecars.push_back(std::move(ck.sidecar));
    }
    return s;
}

template <Real T>
Surrogates<T> load_named(const RunConfig& config, const std::vector<std::string>& names) {
    std::vector<fs::path> paths;
    for (const auto& n : names) paths.push_back(checkpoint_path(config, find_model(config, n)));
    return load_models<T>(names, paths);
}

json runlog_json(const RunLog& log) {
    json epochs = json::array();
    for (const auto& e : log.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"rho_t", e.schedule.rho},
                          {"r_t", e.schedule.radius},
                          {"mean_loss", e.mean_loss},
                          {"mean_param_distance", e.mean_param_distance},
                          {"max_param_distance", e.max_param_distance},
                          {"mean_data_distance", e.mean_data_distance},
                          {"max_data_distance", e.max_data_distance},
                          {"delta_linf", e.delta_linf}});
    }
    return json{{"epochs", epochs},
                {"batches", log.batches},
                {"seconds", log.seconds},
                {"effective_radius", log.effective_radius},
                {"budgets",
                 {{"checks", log.budgets.checks},
                  {"violations", log.budgets.violations},
                  {"max_param_excess", log.budgets.max_param_excess},
                  {"max_data_excess", log.budgets.max_data_excess},
                  {"max_delta_excess", log.budgets.max_delta_excess}}}};
}

std::string runlog_csv(const RunLog& log) {
    std::ostringstream out;
    out << "epoch,rho_t,r_t,alpha_m,alpha_d,mean_loss,mean_param_dist,max_param_dist,mean_data_dist,max_data_dist,"
           "delta_linf,seconds\n";
    for (const auto& e : log.epochs) {
        out << e.epoch << ',' << fmt(e.schedule.rho, 6) << ',' << fmt(e.schedule.radius, 6) << ','
            << fmt(e.schedule.alpha_model, 6) << ',' << fmt(e.schedule.alpha_data, 6) << ',' << fmt(e.mean_loss, 6)
            << ',' << fmt(e.mean_param_distance, 6) << ',' << fmt(e.max_param_distance, 6) << ','
            << fmt(e.mean_data_distance, 6) << ',' << fmt(e.max_data_distance, 6) << ',' << fmt(e.delta_linf, 6)
            << ',' << fmt(e.seconds, 3) << '\n';
    }
    return out.str();
}

template <Real T>
struct CraftOutcome {
    CraftResult<T> result;
    json metadata;
};

template <Real T>
CraftOutcome<T> run_craft(const RunConfig& config, const Surrogates<T>& s, const DatasetSplits& splits) {
    CraftResult<T> res = craft(config.attack, std::span<const ModelState<T>>(s.models), splits.craft);
    json surrogates = json::array();
    for (std::size_t i = 0; i < s.models.size(); ++i) {
        surrogates.push_back({{"name", s.names[i]},
                              {"checkpoint", s.paths[i].string()},
                              {"content_hash", s.sidecars[i].value("content_hash", "")},
                              {"fingerprint", hex64(model_fingerprint(s.models[i]))}});
    }
    json meta{{"kind", "delta"},
              {"variant", config.attack.variant},
              {"precision", config.precision},
              {"attack", to_json(config.attack)},
              {"effective_radius", res.log.effective_radius},
              {"surrogates", surrogates},
              {"dataset",
               {{"craft_fingerprint", hex64(splits.craft.fingerprint)},
                {"train_fingerprint", hex64(splits.train.fingerprint)},
                {"craft_size", splits.craft.size()}}},
              {"shape", res.delta.shape()},
              {"runlog", runlog_json(res.log)},
              {"run_config", to_json(config)}};
    return CraftOutcome<T>{std::move(res), std::move(meta)};
}

template <Real T>
fs::path store_delta(const OutputTree& tree, const std::string& label, const CraftOutcome<T>& outcome) {
    const std::string hash = git_blob_hash(encode_tensor(outcome.result.delta));
    const fs::path path = tree.deltas() / (label + "-" + short_hash(hash) + ".uapt");
    save_delta_artifact(path, outcome.result.delta, outcome.metadata);
    fs::path csv = path;
    csv.replace_extension(".runlog.csv");
    write_text(csv, runlog_csv(outcome.result.log));
    return path;
}

template <Real T>
int craft_impl(const RunConfig& config, std::ostream& out) {
    const DatasetSplits splits = resolve_datasets(config.dataset);
    const Surrogates<T> s = load_named<T>(config, surrogate_names(config));
    const CraftOutcome<T> outcome = run_craft(config, s, splits);
    const OutputTree tree{config.output.directory};
    const std::string label = delta_label(config);
    const fs::path path = store_delta(tree, label, outcome);
    write_ref(tree.deltas(), label, path);
    const RunLog& log = outcome.result.log;
    for (const auto& e : log.epochs) {
        out << "epoch " << e.epoch << " rho_t=" << fmt(e.schedule.rho) << " r_t=" << fmt(e.schedule.radius)
            << " loss=" << fmt(e.mean_loss, 6) << " |theta*-theta|max=" << fmt(e.max_param_distance)
            << " |x*-x|max=" << fmt(e.max_data_distance) << '\n';
    }
    out << "budget checks " << log.budgets.checks << ", violations " << log.budgets.violations << '\n';
    out << "crafted " << label << " (" << config.attack.variant << ") -> " << path.string() << '\n';
    return kExitOk;
}

// ---- eval ----------------------------------------------------------------

template <Real T>
struct DeltaEntry {
    NamedDelta<T> named;
    std::optional<double> epsilon;
};

template <Real T>
DeltaEntry<T> load_delta_named(const RunConfig& config, const std::string& name) {
    fs::path path;
    if (fs::path(name).extension() == ".uapt") {
        path = name;
        if (!fs::exists(path)) throw MissingFileError("missing file " + path.string());
    } else {
        path = resolve_ref(OutputTree{config.output.directory}.deltas(), name);
    }
    LoadedDelta<T> d = load_delta_artifact<T>(path);
    std::string surrogate;
    if (d.metadata.contains("surrogates")) {
        for (const auto& s : d.metadata["surrogates"]) {
            surrogate += (surrogate.empty() ? "" : "+") + s.value("name", std::string("?"));
        }
    }
    const std::string label = fs::path(name).extension() == ".uapt" ? path.stem().string() : name;
    DeltaEntry<T> e{NamedDelta<T>{label + (surrogate.empty() ? "" : "@" + surrogate), std::move(d.delta)}, {}};
    if (d.metadata.contains("attack")) e.epsilon = d.metadata["attack"].value("epsilon", 0.0);
    return e;
}

std::string matrix_table(const TransferMatrix& m) {
    std::ostringstream out;
    out << "surrogate \\ target";
    for (const auto& t : m.targets) out << '\t' << t;
    out << "\taverage\n";
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        out << m.surrogates[i];
        for (std::size_t j = 0; j < m.cells[i].size(); ++j) out << '\t' << fmt(m.ratio(i, j));
        out << '\t' << fmt(m.row_average[i]) << '\n';
    }
    return out.str();
}

std::vector<fs::path> write_reports(const RunConfig& config, const std::string& stem, const TransferMatrix& m,
                                    const json& echo) {
    const OutputTree tree{config.output.directory};
    const std::string content = dump_json(report_to_json(m, echo));
    const std::string hash = hex64(fnv1a64(content));
    std::vector<fs::path> paths;
    for (const auto& f : config.output.formats) {
        const fs::path path = tree.reports() / (stem + "-" + short_hash(hash) + "." + f);
        report_write(m, path, parse_report_format(f), echo);
        paths.push_back(path);
    }
    return paths;
}

template <Real T>
int eval_impl(const RunConfig& config, std::ostream& out) {
    const DatasetSplits splits = resolve_datasets(config.dataset);
    const Dataset& data = eval_split(config, splits);
    std::vector<std::string> target_names = config.eval.targets;
    if (target_names.empty()) {
        for (const auto& m : config.models) target_names.push_back(m.name);
    }
    std::vector<std::string> delta_names = config.eval.deltas;
    if (delta_names.empty()) delta_names.push_back(delta_label(config));

    std::vector<NamedModel<T>> targets;
    for (const auto& name : target_names) {
        targets.push_back({name, load_checkpoint<T>(checkpoint_path(config, find_model(config, name))).model});
    }
    std::vector<NamedDelta<T>> deltas;
    std::optional<double> epsilon;
    for (const auto& name : delta_names) {
        DeltaEntry<T> e = load_delta_named<T>(config, name);
        if (e.epsilon) epsilon = epsilon ? std::max(*epsilon, *e.epsilon) : *e.epsilon;
        deltas.push_back(std::move(e.named));
    }
    EvalOptions opts;
    opts.threads = config.eval.threads;
    opts.epsilon = epsilon;
    const TransferMatrix m = transfer_matrix<T>(targets, deltas, data, opts);
    for (const auto& row : m.cells) {
        for (const auto& c : row) {
            if (c.budget_exceeded) out << "warning: " << c.delta_id << " exceeds its recorded budget\n";
        }
    }
    out << matrix_table(m);
    const json echo{{"split", config.eval.split}, {"dataset_fingerprint", hex64(data.fingerprint)},
                    {"run_config", to_json(config)}};
    for (const auto& p : write_reports(config, "transfer", m, echo)) out << "wrote " << p.string() << '\n';
    return kExitOk;
}

// ---- ablate --------------------------------------------------------------

std::string value_text(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

RunConfig apply_sweep(RunConfig config, const std::string& axis, const json& v) {
    if (axis == "order") config.attack.order = parse_order(v.get<std::string>());
    else if (axis == "rho") config.attack.rho = v.get<double>();
    else if (axis == "r") config.attack.radius = v.get<double>();
    else if (axis == "curriculum") config.attack.curriculum = v.get<bool>();
    else throw ConfigError("ablate: unknown axis '" + axis + "'");
    config.ablate.reset();
    return config;
}

template <Real T>
int ablate_impl(const RunConfig& config, std::ostream& out) {
    if (!config.ablate) throw ConfigError("ablate: no sweep configured (add an \"ablate\" section)");
    const AblateConfig& sweep = *config.ablate;
    const DatasetSplits splits = resolve_datasets(config.dataset);
    const Dataset& data = eval_split(config, splits);
    const Surrogates<T> s = load_named<T>(config, surrogate_names(config));
    std::vector<std::string> target_names = config.eval.targets;
    if (target_names.empty()) target_names = s.names;
    std::vector<NamedModel<T>> targets;
    for (const auto& name : target_names) {
        targets.push_back({name, load_checkpoint<T>(checkpoint_path(config, find_model(config, name))).model});
    }
    std::vector<std::uint64_t> seeds = sweep.seeds;
    if (seeds.empty()) seeds.push_back(config.seed);

    const OutputTree tree{config.output.directory};
    std::ostringstream csv;
    csv << "axis,value,fooling_ratio,n,dataset_fp,delta_hash\n";
    json rows = json::array();
    for (const auto& v : sweep.values) {
        double sum = 0.0;
        std::vector<std::string> hashes;
        json per_seed = json::array();
        for (std::uint64_t seed : seeds) {
            RunConfig point = apply_sweep(config, sweep.axis, v);
            point.seed = seed;
            point.attack.seed = seed;
            const CraftOutcome<T> outcome = run_craft(point, s, splits);
            const std::string label = "ablate-" + sweep.axis + "-" + value_text(v) + "-s" + std::to_string(seed);
            store_delta(tree, label, outcome);
            std::vector<NamedDelta<T>> deltas{{label, outcome.result.delta}};
            EvalOptions opts;
            opts.threads = config.eval.threads;
            opts.epsilon = point.attack.epsilon;
            const TransferMatrix m = transfer_matrix<T>(targets, deltas, data, opts);
            sum += m.row_average[0];
            hashes.push_back(m.cells[0][0].delta_hash);
            per_seed.push_back({{"seed", seed}, {"fooling_ratio", round4(m.row_average[0])},
                                {"delta_hash", m.cells[0][0].delta_hash}});
        }
        const double mean = sum / static_cast<double>(seeds.size());
        std::string joined;
        for (const auto& h : hashes) joined += (joined.empty() ? "" : ";") + h;
        csv << sweep.axis << ',' << value_text(v) << ',' << fmt(mean) << ',' << data.size() << ','
            << hex64(data.fingerprint) << ',' << joined << '\n';
        rows.push_back({{"value", v}, {"fooling_ratio", round4(mean)}, {"seeds", per_seed}});
        out << sweep.axis << '=' << value_text(v) << " fooling_ratio=" << fmt(mean) << '\n';
    }
    const json doc{{"axis", sweep.axis},
                   {"targets", target_names},
                   {"dataset_fingerprint", hex64(data.fingerprint)},
                   {"rows", rows},
                   {"config", to_json(config)}};
    const std::string content = dump_json(doc);
    const std::string stem = "ablate-" + sweep.axis + "-" + short_hash(hex64(fnv1a64(content)));
    for (const auto& f : config.output.formats) {
        const fs::path path = tree.reports() / (stem + "." + f);
        write_text(path, f == "json" ? content : csv.str());
        out << "wrote " << path.string() << '\n';
    }
    return kExitOk;
}

// ---- verify --------------------------------------------------------------

template <Real T>
std::string rederive_delta(const json& meta) {
    const RunConfig config = run_config_from_json(meta.at("run_config"));
    std::vector<std::string> names;
    std::vector<fs::path> paths;
    for (const auto& s : meta.at("surrogates")) {
        names.push_back(s.at("name").get<std::string>());
        paths.push_back(s.at("checkpoint").get<std::string>());
    }
    const Surrogates<T> s = load_models<T>(names, paths);
    const DatasetSplits splits = resolve_datasets(config.dataset);
    const CraftOutcome<T> outcome = run_craft(config, s, splits);
    return git_blob_hash(encode_tensor(outcome.result.delta));
}

template <Real T>
std::string rederive_checkpoint(const json& side) {
    const json& extra = side.at("extra");
    const RunConfig config = run_config_from_json(extra.at("run_config"));
    const ModelConfig& m = find_model(config, extra.at("name").get<std::string>());
    const DatasetSplits splits = resolve_datasets(config.dataset);
    return git_blob_hash(encode_tensor(train_model<T>(config, m, splits.train).model.params));
}

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out) {
    return config.precision == "f64" ? train_impl<double>(config, out) : train_impl<float>(config, out);
}

int cmd_craft(const RunConfig& config, std::ostream& out) {
    return config.precision == "f64" ? craft_impl<double>(config, out) : craft_impl<float>(config, out);
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
    return config.precision == "f64" ? eval_impl<double>(config, out) : eval_impl<float>(config, out);
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
    return config.precision == "f64" ? ablate_impl<double>(config, out) : ablate_impl<float>(config, out);
}

int cmd_verify(const fs::path& artifact, bool rederive, std::ostream& out) {
    const auto bytes = read_file_bytes(artifact);
    const fs::path side_path = sidecar_path(artifact);
    const auto side_bytes = read_file_bytes(side_path);
    json side;
    try {
        side = json::parse(side_bytes.begin(), side_bytes.end());
    } catch (const json::exception& e) {
        throw FormatError(side_path.string() + ": " + e.what());
    }
    const std::string actual = git_blob_hash(bytes);
    const std::string recorded = side.value("content_hash", "");
    if (actual != recorded) {
        out << "MISMATCH " << artifact.string() << ": content " << actual << ", recorded " << recorded << '\n';
        return kExitFailure;
    }
    out << "ok content hash " << actual << '\n';
    if (!rederive) return kExitOk;

    const std::string precision = side.value("precision", "f32");
    std::string rebuilt;
    if (side.contains("run_config") && side.contains("surrogates")) {
        rebuilt = precision == "f64" ? rederive_delta<double>(side) : rederive_delta<float>(side);
    } else if (side.contains("extra") && side["extra"].contains("run_config")) {
        rebuilt = precision == "f64" ? rederive_checkpoint<double>(side) : rederive_checkpoint<float>(side);
    } else {
        throw FormatError(side_path.string() + ": no embedded configuration to rederive from");
    }
    if (rebuilt != actual) {
        out << "MISMATCH rederived " << rebuilt << " vs " << actual << '\n';
        return kExitFailure;
    }
    out << "ok rederived hash " << rebuilt << '\n';
    return kExitOk;
}

}  // namespace uapforge
