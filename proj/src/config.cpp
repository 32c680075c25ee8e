// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include "uapforge/rng.hpp"
#include "uapforge/tensor_io.hpp"

extern char** environ;

namespace uapforge {

using nlohmann::json;

namespace {

const std::set<std::string> kSections{"dataset", "model", "attack", "adam", "eval", "output", "ablate"};
const std::set<std::string> kTopLevelScalars{"seed", "precision"};

/// Reads keys from one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const json& doc, std::string name) : name_(std::move(name)) {
        if (doc.is_null()) return;
        if (!doc.is_object()) throw ConfigError(name_ + ": expected an object");
        doc_ = &doc;
    }

    template <typename V>
    void get(const char* key, V& out) {
        seen_.insert(key);
        if (!doc_ || !doc_->contains(key)) return;
        try {
            out = doc_->at(key).get<V>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + ": wrong type (" + doc_->at(key).dump() + ")");
        }
    }

    const json* raw(const char* key) {
        seen_.insert(key);
        if (!doc_ || !doc_->contains(key)) return nullptr;
        return &doc_->at(key);
    }

    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    void finish() const {
        if (!doc_) return;
        for (const auto& [key, value] : doc_->items()) {
            if (!seen_.count(key)) throw ConfigError(path(key) + ": unknown key");
        }
    }

private:
    const json* doc_ = nullptr;
    std::string name_;
    std::set<std::string> seen_;
};

void set_path(json& doc, const std::string& dotted, const json& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + dotted + "': empty key component");
        if (!node->is_object()) throw ConfigError("override '" + dotted + "': '" + part + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

ModelConfig parse_model(const json& j, const std::string& where) {
    ModelConfig m;
    Section s(j, where);
    s.get("name", m.name);
    s.get("arch", m.arch);
    s.get("width", m.width);
    s.get("checkpoint", m.checkpoint);
    if (const json* t = s.raw("train")) {
        Section ts(*t, where + ".train");
        ts.get("epochs", m.train.epochs);
        ts.get("lr", m.train.lr);
        ts.get("batch", m.train.batch);
        ts.get("momentum", m.train.momentum);
        ts.finish();
    }
    s.finish();
    return m;
}

json model_to_json(const ModelConfig& m) {
    return json{{"name", m.name},
                {"arch", m.arch},
                {"width", m.width},
                {"checkpoint", m.checkpoint},
                {"train",
                 {{"epochs", m.train.epochs},
                  {"lr", m.train.lr},
                  {"batch", m.train.batch},
                  {"momentum", m.train.momentum}}}};
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

}  // namespace

std::pair<std::string, json> parse_override(const std::string& text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "': expected key=value");
    return {text.substr(0, eq), parse_scalar(text.substr(eq + 1))};
}

Overrides env_overrides(const std::map<std::string, std::string>& env) {
    static const std::string prefix = "UAPFORGE_";
    Overrides out;
    for (const auto& [name, value] : env) {
        if (name.rfind(prefix, 0) != 0) continue;
        const std::string rest = lower(name.substr(prefix.size()));
        if (kTopLevelScalars.count(rest)) {
            out.emplace_back(rest, parse_scalar(value));
            continue;
        }
        const std::size_t us = rest.find('_');
        const std::string section = rest.substr(0, us);
        if (us == std::string::npos || !kSections.count(section)) {
            throw ConfigError("environment variable " + name + " does not name a config key");
        }
        // A double underscore reaches nested keys: UAPFORGE_MODEL_TRAIN__EPOCHS.
        std::string key = rest.substr(us + 1);
        for (std::size_t at = key.find("__"); at != std::string::npos; at = key.find("__", at + 1)) {
            key.replace(at, 2, ".");
        }
        out.emplace_back(section + "." + key, parse_scalar(value));
    }
    return out;
}

Overrides env_overrides_from_process() {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        const std::size_t eq = entry.find('=');
        if (eq != std::string::npos) env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
    }
    return env_overrides(env);
}

RunConfig run_config_from_json(const json& doc) {
    RunConfig c;
    Section top(doc, "");
    top.get("seed", c.seed);
    top.get("precision", c.precision);

    if (const json* d = top.raw("dataset")) {
        Section s(*d, "dataset");
        DatasetConfig& ds = c.dataset;
        s.get("source", ds.source);
        s.get("images", ds.images);
        s.get("labels", ds.labels);
        s.get("test_images", ds.test_images);
        s.get("test_labels", ds.test_labels);
        s.get("n", ds.n);
        s.get("test_size", ds.test_size);
        s.get("num_classes", ds.num_classes);
        s.get("size", ds.size);
        s.get("strokes", ds.strokes);
        s.get("thickness", ds.thickness);
        s.get("jitter", ds.jitter);
        s.get("shift", ds.shift);
        s.get("noise", ds.noise);
        s.get("shape", ds.shape);
        s.get("spread", ds.spread);
        s.get("subset_size", ds.subset_size);
        s.get("seed", ds.seed);
        s.finish();
    }

    const json* single = top.raw("model");
    const json* many = top.raw("models");
    if (single && many) throw ConfigError("model/models: give one of the two sections, not both");
    if (single) c.models = {parse_model(*single, "model")};
    if (many) {
        if (!many->is_array() || many->empty()) throw ConfigError("models: expected a non-empty array");
        c.models.clear();
        for (std::size_t i = 0; i < many->size(); ++i) {
            c.models.push_back(parse_model((*many)[i], "models[" + std::to_string(i) + "]"));
        }
    }

    if (const json* a = top.raw("attack")) {
        Section s(*a, "attack");
        AttackConfig& at = c.attack;
        std::string variant = at.variant;
        std::string order = order_name(at.order);
        s.get("variant", variant);
        s.get("epsilon", at.epsilon);
        s.get("epochs", at.epochs);
        s.get("batch_size", at.batch_size);
        s.get("model_steps", at.model_steps);
        s.get("data_steps", at.data_steps);
        s.get("rho", at.rho);
        s.get("r", at.radius);
        s.get("gamma", at.gamma);
        s.get("order", order);
        s.get("curriculum", at.curriculum);
        s.get("clamp_data_box", at.clamp_data_box);
        s.get("rescale_radius", at.rescale_radius);
        s.get("strict_budgets", at.strict_budgets);
        s.get("surrogates", c.surrogates);
        s.get("name", c.delta_name);
        at.order = parse_order(order);
        // The preset pins its own fields; everything else keeps the file's values.
        at = apply_variant(at, variant);
        s.finish();
    }
    if (const json* a = top.raw("adam")) {
        Section s(*a, "adam");
        s.get("beta1", c.attack.adam.beta1);
        s.get("beta2", c.attack.adam.beta2);
        s.get("eps", c.attack.adam.eps);
        s.finish();
    }
    if (const json* e = top.raw("eval")) {
        Section s(*e, "eval");
        s.get("targets", c.eval.targets);
        s.get("deltas", c.eval.deltas);
        s.get("split", c.eval.split);
        s.get("threads", c.eval.threads);
        s.finish();
    }
    if (const json* o = top.raw("output")) {
        Section s(*o, "output");
        s.get("directory", c.output.directory);
        s.get("formats", c.output.formats);
        s.finish();
    }
    if (const json* ab = top.raw("ablate")) {
        Section s(*ab, "ablate");
        AblateConfig sweep;
        s.get("seeds", sweep.seeds);
        for (const char* axis : {"order", "rho", "r", "curriculum"}) {
            if (const json* v = s.raw(axis)) {
                if (!sweep.axis.empty()) {
                    throw ConfigError("ablate: sweep exactly one axis, got both '" + sweep.axis + "' and '" + axis + "'");
                }
                if (!v->is_array() || v->empty()) throw ConfigError(s.path(axis) + ": expected a non-empty array");
                sweep.axis = axis;
                sweep.values.assign(v->begin(), v->end());
            }
        }
        s.finish();
        if (sweep.axis.empty()) throw ConfigError("ablate: no sweep axis (order, rho, r or curriculum)");
        c.ablate = std::move(sweep);
    }
    top.finish();
    c.attack.seed = c.seed;
    return c;
}

json to_json(const AttackConfig& a) {
    return json{{"variant", a.variant},
                {"epsilon", a.epsilon},
                {"epochs", a.epochs},
                {"batch_size", a.batch_size},
                {"model_steps", a.model_steps},
                {"data_steps", a.data_steps},
                {"rho", a.rho},
                {"r", a.radius},
                {"gamma", a.gamma},
                {"order", order_name(a.order)},
                {"curriculum", a.curriculum},
                {"clamp_data_box", a.clamp_data_box},
                {"rescale_radius", a.rescale_radius},
                {"strict_budgets", a.strict_budgets},
                {"seed", a.seed},
                {"adam", {{"beta1", a.adam.beta1}, {"beta2", a.adam.beta2}, {"eps", a.adam.eps}}}};
}

json to_json(const RunConfig& c) {
    const DatasetConfig& d = c.dataset;
    json doc;
    doc["seed"] = c.seed;
    doc["precision"] = c.precision;
    doc["dataset"] = json{{"source", d.source},           {"images", d.images},
                          {"labels", d.labels},           {"test_images", d.test_images},
                          {"test_labels", d.test_labels}, {"n", d.n},
                          {"test_size", d.test_size},     {"num_classes", d.num_classes},
                          {"size", d.size},               {"strokes", d.strokes},
                          {"thickness", d.thickness},     {"jitter", d.jitter},
                          {"shift", d.shift},             {"noise", d.noise},
                          {"shape", d.shape},             {"spread", d.spread},
                          {"subset_size", d.subset_size}, {"seed", d.seed}};
    json models = json::array();
    for (const auto& m : c.models) models.push_back(model_to_json(m));
    doc["models"] = models;
    json attack = to_json(c.attack);
    attack.erase("seed");
    attack.erase("adam");
    attack["surrogates"] = c.surrogates;
    attack["name"] = c.delta_name;
    doc["attack"] = attack;
    doc["adam"] = json{{"beta1", c.attack.adam.beta1}, {"beta2", c.attack.adam.beta2}, {"eps", c.attack.adam.eps}};
    doc["eval"] = json{{"targets", c.eval.targets}, {"deltas", c.eval.deltas}, {"split", c.eval.split},
                       {"threads", c.eval.threads}};
    doc["output"] = json{{"directory", c.output.directory}, {"formats", c.output.formats}};
    if (c.ablate) {
        json ab{{"seeds", c.ablate->seeds}};
        ab[c.ablate->axis] = c.ablate->values;
        doc["ablate"] = ab;
    }
    return doc;
}

void validate(const RunConfig& c) {
    if (c.precision != "f32" && c.precision != "f64") throw ConfigError("precision: expected f32 or f64");
    const DatasetConfig& d = c.dataset;
    auto require_file = [](const std::string& key, const std::string& path) {
        if (path.empty()) throw ConfigError(key + ": path required");
        if (!std::filesystem::exists(path)) throw ConfigError(key + ": file not found: " + path);
    };
    if (d.source == "idx") {
        require_file("dataset.images", d.images);
        require_file("dataset.labels", d.labels);
        if (!d.test_images.empty() || !d.test_labels.empty()) {
            require_file("dataset.test_images", d.test_images);
            require_file("dataset.test_labels", d.test_labels);
        }
    } else if (d.source == "glyphs" || d.source == "blobs") {
        if (d.num_classes < 2) throw ConfigError("dataset.num_classes: must be >= 2");
        if (d.n < d.num_classes) throw ConfigError("dataset.n: must be >= num_classes");
    } else {
        throw ConfigError("dataset.source: expected glyphs, blobs or idx, got '" + d.source + "'");
    }
    std::set<std::string> names;
    for (const auto& m : c.models) {
        if (m.name.empty()) throw ConfigError("models.name: must not be empty");
        if (!names.insert(m.name).second) throw ConfigError("models.name: duplicate '" + m.name + "'");
        if (m.arch != "logistic" && m.arch != "mlp" && m.arch != "cnn") {
            throw ConfigError("model.arch: expected logistic, mlp or cnn, got '" + m.arch + "'");
        }
        if (m.train.epochs < 0) throw ConfigError("model.train.epochs: must be >= 0");
        if (!(m.train.lr > 0.0)) throw ConfigError("model.train.lr: must be > 0");
        if (m.train.batch < 1) throw ConfigError("model.train.batch: must be >= 1");
        if (!m.checkpoint.empty() && !std::filesystem::exists(m.checkpoint)) {
            throw ConfigError("model.checkpoint: file not found: " + m.checkpoint);
        }
    }
    for (const auto& s : c.surrogates) {
        if (!names.count(s)) throw ConfigError("attack.surrogates: unknown model '" + s + "'");
    }
    for (const auto& t : c.eval.targets) {
        if (!names.count(t)) throw ConfigError("eval.targets: unknown model '" + t + "'");
    }
    if (c.eval.split != "test" && c.eval.split != "train" && c.eval.split != "craft") {
        throw ConfigError("eval.split: expected test, train or craft");
    }
    if (c.eval.threads < 1) throw ConfigError("eval.threads: must be >= 1");
    for (const auto& f : c.output.formats) {
        if (f != "json" && f != "csv") throw ConfigError("output.formats: unknown format '" + f + "'");
    }
    if (c.output.directory.empty()) throw ConfigError("output.directory: must not be empty");
    validate(c.attack);
    if (c.ablate) {
        for (const auto& v : c.ablate->values) {
            const bool ok = c.ablate->axis == "order"        ? v.is_string()
                            : c.ablate->axis == "curriculum" ? v.is_boolean()
                                                             : v.is_number() && v.get<double>() >= 0.0;
            if (!ok) throw ConfigError("ablate." + c.ablate->axis + ": bad sweep value " + v.dump());
            if (c.ablate->axis == "order") parse_order(v.get<std::string>());
        }
    }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const Overrides& env,
                          const Overrides& flags) {
    json doc = json::object();
    if (file) {
        if (!std::filesystem::exists(*file)) throw ConfigError("config file not found: " + file->string());
        const auto bytes = read_file_bytes(*file);
        try {
            doc = json::parse(bytes.begin(), bytes.end());
        } catch (const json::exception& e) {
            throw ConfigError(file->string() + ": " + e.what());
        }
        if (!doc.is_object()) throw ConfigError(file->string() + ": top level must be an object");
    }
    // A single-model override addresses "model.*"; fold it into "models[0]"
    // when the file uses the list form.
    auto apply = [&](const Overrides& list) {
        for (const auto& [key, value] : list) {
            if (key.rfind("model.", 0) == 0 && doc.contains("models")) {
                set_path(doc["models"][0], key.substr(6), value);
            } else {
                set_path(doc, key, value);
            }
        }
    };
    apply(env);
    apply(flags);
    RunConfig c = run_config_from_json(doc);
    validate(c);
    return c;
}

DatasetSplits resolve_datasets(const DatasetConfig& d) {
    DatasetSplits out;
    if (d.source == "idx") {
        out.train = load_idx(d.images, d.labels);
        if (!d.test_images.empty()) {
            out.test = load_idx(d.test_images, d.test_labels);
        } else if (d.test_size > 0) {
            if (d.test_size >= out.train.size()) throw ConfigError("dataset.test_size: leaves no training data");
            auto [head, tail] = split(out.train, out.train.size() - d.test_size);
            out.train = std::move(head);
            out.test = std::move(tail);
        }
    } else {
        const std::size_t total = d.n + d.test_size;
        Dataset all;
        if (d.source == "glyphs") {
            GlyphSpec g;
            g.num_classes = d.num_classes;
            g.n = total;
            g.size = d.size;
            g.strokes = d.strokes;
            g.thickness = d.thickness;
            g.jitter = d.jitter;
            g.shift = d.shift;
            g.noise = d.noise;
            g.seed = derive_seed(d.seed, "glyphs");
            all = synth_glyphs(g);
        } else {
            BlobSpec b;
            b.num_classes = d.num_classes;
            b.n = total;
            b.sample_shape = d.shape;
            b.spread = d.spread;
            b.seed = derive_seed(d.seed, "blobs");
            all = synth_blobs(b);
        }
        if (d.test_size > 0) {
            auto [head, tail] = split(all, d.n);
            out.train = std::move(head);
            out.test = std::move(tail);
        } else {
            out.train = std::move(all);
        }
    }
    if (d.subset_size == 0 || d.subset_size >= out.train.size()) {
        out.craft = out.train;
    } else {
        out.craft = subset(out.train, d.subset_size, derive_seed(d.seed, "subset"));
    }
    return out;
}

}  // namespace uapforge
