// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "uapforge/hash.hpp"
#include "uapforge/tensor_io.hpp"

namespace uapforge {

using nlohmann::json;

std::optional<double> FoolingReport::clean_accuracy() const {
    if (!clean_correct || n_evaluated == 0) return std::nullopt;
    return static_cast<double>(*clean_correct) / static_cast<double>(n_evaluated);
}

std::optional<double> FoolingReport::perturbed_accuracy() const {
    if (!perturbed_correct || n_evaluated == 0) return std::nullopt;
    return static_cast<double>(*perturbed_correct) / static_cast<double>(n_evaluated);
}

template <Real T>
std::string delta_content_hash(const Tensor<T>& delta) {
    const auto bytes = encode_tensor(delta);
    return git_blob_hash(bytes);
}

namespace {

struct ChunkCounts {
    std::size_t changed = 0;
    std::size_t clean_correct = 0;
    std::size_t perturbed_correct = 0;
    std::size_t correct_to_wrong = 0;
};

template <Real T>
ChunkCounts evaluate_chunk(const ModelState<T>& model, const Dataset& dataset, const Tensor<T>& delta,
                           std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    Tensor<T> X = gather_images<T>(dataset, idx);
    const Labels clean = predict(model, X);
    const std::size_t per = delta.numel();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t k = 0; k < per; ++k) {
            T& v = X[i * per + k];
            v = std::clamp(static_cast<T>(v + delta[k]), T(0), T(1));
        }
    }
    const Labels perturbed = predict(model, X);
    ChunkCounts c;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (clean[i] != perturbed[i]) ++c.changed;
        if (dataset.labels) {
            const std::int32_t y = (*dataset.labels)[idx[i]];
            const bool was = clean[i] == y;
            const bool is = perturbed[i] == y;
            c.clean_correct += was;
            c.perturbed_correct += is;
            c.correct_to_wrong += was && !is;
        }
    }
    return c;
}

}  // namespace

template <Real T>
FoolingReport fooling_ratio(const ModelState<T>& model, const Dataset& dataset, const Tensor<T>& delta,
                            const EvalOptions& options) {
    if (delta.shape() != dataset.sample_shape()) {
        throw ShapeError("fooling_ratio: perturbation shape " + shape_str(delta.shape()) + " vs sample shape " +
                         shape_str(dataset.sample_shape()));
    }
    if (dataset.sample_shape() != model.spec.input_shape) {
        throw ShapeError("fooling_ratio: dataset sample shape " + shape_str(dataset.sample_shape()) +
                         " vs model input " + shape_str(model.spec.input_shape));
    }
    if (dataset.size() == 0) throw ShapeError("fooling_ratio: empty dataset");
    if (options.chunk == 0) throw ConfigError("fooling_ratio: chunk must be >= 1");
    delta.check_finite("fooling_ratio perturbation");

    const std::size_t n = dataset.size();
    const std::size_t chunks = (n + options.chunk - 1) / options.chunk;
    std::vector<ChunkCounts> counts(chunks);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * options.chunk;
        counts[c] = evaluate_chunk(model, dataset, delta, begin, std::min(n, begin + options.chunk));
    };

    const unsigned width = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(chunks)));
    if (width == 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(width);
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < width; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    FoolingReport r;
    r.model_id = options.model_id.empty() ? hex64(model_fingerprint(model)) : options.model_id;
    r.delta_hash = delta_content_hash(delta);
    r.delta_id = options.delta_id.empty() ? r.delta_hash : options.delta_id;
    r.dataset_fp = dataset.fingerprint;
    r.n_evaluated = n;
    ChunkCounts total;
    for (const auto& c : counts) {
        total.changed += c.changed;
        total.clean_correct += c.clean_correct;
        total.perturbed_correct += c.perturbed_correct;
        total.correct_to_wrong += c.correct_to_wrong;
    }
    r.n_changed = total.changed;
    r.fooling_ratio = static_cast<double>(total.changed) / static_cast<double>(n);
    if (dataset.labels) {
        r.clean_correct = total.clean_correct;
        r.perturbed_correct = total.perturbed_correct;
        r.correct_to_wrong = total.correct_to_wrong;
    }
    r.delta_linf = linf_norm(delta.data());
    if (options.epsilon) r.budget_exceeded = r.delta_linf > *options.epsilon;
    return r;
}

template <Real T>
TransferMatrix transfer_matrix(std::span<const NamedModel<T>> targets, std::span<const NamedDelta<T>> deltas,
                               const Dataset& dataset, const EvalOptions& options) {
    if (targets.empty()) throw ConfigError("transfer_matrix: no target models");
    if (deltas.empty()) throw ConfigError("transfer_matrix: no perturbations");
    TransferMatrix m;
    for (const auto& t : targets) m.targets.push_back(t.id);
    for (const auto& d : deltas) {
        m.surrogates.push_back(d.surrogate);
        std::vector<FoolingReport> row;
        double sum = 0.0;
        for (const auto& t : targets) {
            EvalOptions o = options;
            o.model_id = t.id;
            o.delta_id = d.surrogate;
            row.push_back(fooling_ratio(t.model, dataset, d.delta, o));
            sum += row.back().fooling_ratio;
        }
        m.row_average.push_back(sum / static_cast<double>(row.size()));
        m.cells.push_back(std::move(row));
    }
    return m;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw ConfigError("unknown report format '" + name + "' (expected json or csv)");
}

double round4(double value) {
    return std::round(value * 1e4) / 1e4;
}

namespace {

json cell_to_json(const FoolingReport& r) {
    json j;
    j["model_id"] = r.model_id;
    j["delta_id"] = r.delta_id;
    j["dataset_fp"] = hex64(r.dataset_fp);
    j["delta_hash"] = r.delta_hash;
    j["n_evaluated"] = r.n_evaluated;
    j["n_changed"] = r.n_changed;
    j["fooling_ratio"] = round4(r.fooling_ratio);
    j["delta_linf"] = round4(r.delta_linf);
    j["budget_exceeded"] = r.budget_exceeded;
    if (r.clean_correct) {
        j["clean_correct"] = *r.clean_correct;
        j["perturbed_correct"] = *r.perturbed_correct;
        j["correct_to_wrong"] = *r.correct_to_wrong;
        j["clean_accuracy"] = round4(*r.clean_accuracy());
        j["perturbed_accuracy"] = round4(*r.perturbed_accuracy());
    }
    return j;
}

FoolingReport cell_from_json(const json& j) {
    FoolingReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.delta_id = j.at("delta_id").get<std::string>();
    r.dataset_fp = std::stoull(j.at("dataset_fp").get<std::string>(), nullptr, 16);
    r.delta_hash = j.at("delta_hash").get<std::string>();
    r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
    r.n_changed = j.at("n_changed").get<std::size_t>();
    r.fooling_ratio = j.at("fooling_ratio").get<double>();
    r.delta_linf = j.at("delta_linf").get<double>();
    r.budget_exceeded = j.at("budget_exceeded").get<bool>();
    if (j.contains("clean_correct")) {
        r.clean_correct = j.at("clean_correct").get<std::size_t>();
        r.perturbed_correct = j.at("perturbed_correct").get<std::size_t>();
        r.correct_to_wrong = j.at("correct_to_wrong").get<std::size_t>();
    }
    return r;
}

}  // namespace

json report_to_json(const TransferMatrix& m, const json& config) {
    json doc;
    doc["config"] = config;
    doc["surrogates"] = m.surrogates;
    doc["targets"] = m.targets;
    json rows = json::array();
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        json cells = json::array();
        for (const auto& c : m.cells[i]) cells.push_back(cell_to_json(c));
        rows.push_back({{"surrogate", m.surrogates[i]}, {"average", round4(m.row_average[i])}, {"cells", cells}});
    }
    doc["rows"] = rows;
    return doc;
}

TransferMatrix report_from_json(const json& doc) {
    try {
        TransferMatrix m;
        m.surrogates = doc.at("surrogates").get<std::vector<std::string>>();
        m.targets = doc.at("targets").get<std::vector<std::string>>();
        for (const auto& row : doc.at("rows")) {
            std::vector<FoolingReport> cells;
            for (const auto& c : row.at("cells")) cells.push_back(cell_from_json(c));
            if (cells.size() != m.targets.size()) throw FormatError("report: row width differs from target count");
            m.cells.push_back(std::move(cells));
            m.row_average.push_back(row.at("average").get<double>());
        }
        if (m.cells.size() != m.surrogates.size()) throw FormatError("report: row count differs from surrogates");
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
}

std::string report_to_csv(const TransferMatrix& m) {
    std::ostringstream out;
    out << "surrogate,target,fooling_ratio,n,dataset_fp,delta_hash\n";
    char ratio[32];
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        for (std::size_t j = 0; j < m.cells[i].size(); ++j) {
            const FoolingReport& r = m.cells[i][j];
            std::snprintf(ratio, sizeof ratio, "%.4f", r.fooling_ratio);
            out << m.surrogates[i] << ',' << m.targets[j] << ',' << ratio << ',' << r.n_evaluated << ','
                << hex64(r.dataset_fp) << ',' << r.delta_hash << '\n';
        }
    }
    return out.str();
}

std::string dump_json(const json& doc) {
    return doc.dump(2) + "\n";
}

void report_write(const TransferMatrix& m, const std::filesystem::path& path, ReportFormat format,
                  const json& config) {
    const std::string text = format == ReportFormat::json ? dump_json(report_to_json(m, config)) : report_to_csv(m);
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

template FoolingReport fooling_ratio<float>(const ModelState<float>&, const Dataset&, const Tensor<float>&,
                                            const EvalOptions&);
template FoolingReport fooling_ratio<double>(const ModelState<double>&, const Dataset&, const Tensor<double>&,
                                             const EvalOptions&);
template std::string delta_content_hash<float>(const Tensor<float>&);
template std::string delta_content_hash<double>(const Tensor<double>&);
template TransferMatrix transfer_matrix<float>(std::span<const NamedModel<float>>, std::span<const NamedDelta<float>>,
                                               const Dataset&, const EvalOptions&);
template TransferMatrix transfer_matrix<double>(std::span<const NamedModel<double>>,
                                                std::span<const NamedDelta<double>>, const Dataset&,
                                                const EvalOptions&);

}  // namespace uapforge
